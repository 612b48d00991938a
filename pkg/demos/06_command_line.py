"""Drive the command-line tool from Python on a throwaway model file.

Run:  python3 demos/06_command_line.py
"""
import json
import pathlib
import tempfile

from dbnabs.cli import main

model = {
    "n": 2,
    "phi": [[0.8, 0.0], [0.5, 0.8]],
    "sigma": [0.6, 0.6],
    "safe_lo": [-1, -1],
    "safe_hi": [1, 1],
    "horizon": 10,
    "epsilon": 0.5,
}

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    path = tmp / "model.json"
    path.write_text(json.dumps(model, indent=2))

    main(["cost", str(path)])
    main(["abstract", str(path), "--out", str(tmp / "model.dbna")])
    print(json.loads((tmp / "model.dbna.report.json").read_text())["bounds"]["total"])
    main(["check", str(tmp / "model.dbna"), "--init", "0,0", "--report", str(tmp / "check.json")])
    print("probability:", json.loads((tmp / "check.json").read_text())["probability"])
    main(["mc", str(path), "--init", "0,0", "--samples", "20000"])
    main(["compare", "--n", "1..4"])
