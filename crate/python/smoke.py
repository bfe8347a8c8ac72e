"""Smoke test for the ifcnav Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
Then run:                 python python/smoke.py [model.ifc]
"""

import pathlib
import sys
import tempfile

import ifcnav

ROOT = pathlib.Path(__file__).resolve().parent.parent
DEFAULT_IFC = ROOT / "crates/core/tests/fixtures/AC20-FZK-Haus.ifc"


def main() -> int:
    ifc = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_IFC
    with tempfile.TemporaryDirectory() as out:
        report = ifcnav.ingest(str(ifc), out)
        print(f"ingested {ifc.name}: {report['nodes']} nodes, {report['edges']} edges")
        model = ifcnav.Model(str(pathlib.Path(out) / f"{ifc.stem}.db"))

        rooms = model.sql("SELECT s.name, COUNT(r.id) FROM storey s LEFT JOIN room r ON r.storey_id = s.id GROUP BY s.id")
        for storey, count in rooms["rows"]:
            print(f"  {storey}: {count} rooms")

        scene = model.scene()
        assert scene["units"] == "meters" and scene["boxes"], scene
        run = model.ask(
            "How many rooms are there?",
            responses=["SQL_NEEDED: SELECT COUNT(*) AS n FROM room;", "ANALYSIS_COMPLETE", "Counted the rooms."],
        )
        assert run["state"]["results"][0]["outcome"]["status"] == "rows", run
        print("scripted agent turn:", run["termination"])
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
