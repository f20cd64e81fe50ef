"""framescout: relation-guided keyframe search for long videos.

Given a structured query (weighted key/cue objects plus relation triplets)
and a video, iteratively sample frames, score them with an object detector
and four relation checks, and return the top-scoring keyframes. Ships with
a synthetic scenario harness, an exhaustive reference searcher, and
search-utility metrics.
"""

__version__ = "0.1.0"

from .detect import BBox, Detection, FrameGrid, build_grid, cached_detect, demux_detections
from .metrics import (
    label_jaccard_similarity,
    set_precision,
    set_recall,
    ssim,
    temporal_coverage,
)
from .query import (
    QuerySpec,
    RelationTriplet,
    RelationType,
    WeightedObject,
    parse_grounding_text,
    to_grounding_text,
    validate_query,
)
from .search import SearchConfig, SearchResult, run_search
from .synth import (
    OracleBackend,
    Scenario,
    ScenarioTemplate,
    brute_force_search,
    generate_scenario,
    oracle_detect,
    render_frame,
)
