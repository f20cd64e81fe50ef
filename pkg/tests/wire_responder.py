"""Scripted wire-protocol peer for client tests. Deliberately standalone:
it plays the role of an external detector service, so it must not import
the package under test.

Usage: wire_responder.py MODE [FIXTURE]
  MODE: fixture | error | bad-id | garbage | silent-exit
"""

import json
import sys


def main():
    mode = sys.argv[1]
    table = {}
    if mode == "fixture":
        with open(sys.argv[2], encoding="utf-8") as fh:
            for det in json.load(fh)["detections"]:
                table.setdefault(det["frame_index"], []).append(det)
    for line in sys.stdin:
        if mode == "silent-exit":
            return
        req = json.loads(line)
        if mode == "garbage":
            sys.stdout.write("this is not json\n")
            sys.stdout.flush()
            continue
        if mode == "bad-id":
            resp = {"id": "nope", "detections": [], "error": None}
        elif mode == "error":
            resp = {"id": req["id"], "detections": [], "error": "model exploded"}
        else:
            vocab = {v.casefold() for v in req["vocabulary"]}
            wanted = {f["index"] for f in req["frames"]}
            dets = [
                d
                for f in wanted
                for d in table.get(f, [])
                if d["label"].casefold() in vocab
            ]
            resp = {"id": req["id"], "detections": dets, "error": None}
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
