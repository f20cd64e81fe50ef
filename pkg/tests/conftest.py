import pytest

from framescout.detect import BBox, Detection
from framescout.query import QuerySpec, RelationTriplet, RelationType, WeightedObject

DEFAULT_BOX = BBox(0.2, 0.2, 0.6, 0.6)


def make_det(frame, label, conf, box=DEFAULT_BOX):
    return Detection(frame, label, conf, box)


@pytest.fixture
def person_dog_query():
    return QuerySpec(
        question="When does the person appear with the dog?",
        objects=(
            WeightedObject("person", 1.0, "key"),
            WeightedObject("dog", 1.0, "key"),
            WeightedObject("book", 0.5, "cue"),
        ),
        relations=(RelationTriplet("person", RelationType.SPATIAL, "dog"),),
    )
