"""Output schemas (CSV headers, report keys) pinned against tests/golden/."""

import json
import os
from pathlib import Path

import pytest

from cryoeo.config import parse_scenario
from cryoeo.scenario import render_run, run
from conftest import REFERENCE_DUT_YAML

GOLDEN = Path(__file__).parent / "golden"

SCENARIOS = {
    "omit_sweep": "experiment: omit_sweep\n" + REFERENCE_DUT_YAML + "omit: {pump_powers_dbm: [-20, 20]}\n",
    "comb_calibration": "experiment: comb_calibration\n" + REFERENCE_DUT_YAML,
    "psk_link": "experiment: psk_link\npsk: {n_bits: 5000}\n",
    "vpi_characterization": "experiment: vpi_characterization\n",
    "heat_budget": "experiment: heat_budget\nthermal: {modulator: {stage: 4k, transmission: 0.66}}\n",
}


def _keys(d, prefix=""):
    out = []
    for k, v in d.items():
        out.append(prefix + k)
        if isinstance(v, dict):
            out.extend(_keys(v, prefix + k + "."))
    return sorted(out)


def schema(files: dict) -> dict:
    s = {"files": sorted(files)}
    for name, text in files.items():
        if name.endswith(".csv"):
            s[name] = text.splitlines()[0]
        elif name.endswith(".json"):
            s[name] = _keys(json.loads(text))
    return s


@pytest.mark.parametrize("experiment", sorted(SCENARIOS))
def test_schema_matches_golden(experiment):
    sc = parse_scenario(SCENARIOS[experiment])
    got = schema(render_run(run(sc), sc))
    path = GOLDEN / f"{experiment}.json"
    if os.environ.get("CRYOEO_UPDATE_GOLDEN"):
        path.write_text(json.dumps(got, indent=1) + "\n")
    assert got == json.loads(path.read_text())


def test_omit_csv_columns():
    g = json.loads((GOLDEN / "omit_sweep.json").read_text())
    assert g["omit_hemt.csv"] == "pump_power_dbm,n_cav,probe_detuning_hz,s11_magnitude"
    assert g["omit_optical.csv"] == g["omit_hemt.csv"]
