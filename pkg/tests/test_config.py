from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagfree.harness.config import (
    KEYS,
    ConfigError,
    load_config,
    parse_config,
    serialize_config,
    to_mapping,
)

MINIMAL = """
gamma = 2.0
mu = 1.0
dim = 2
profile = "constant"
a0 = 1.0
n_cells = 256
t_end = 50.0
"""


def test_minimal_document_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.params.gamma == 2.0 and cfg.params.dim == 2
    assert cfg.step.scheme == "semi_implicit"
    assert cfg.step.cfl == 0.5
    assert cfg.sample_every == 0.1
    assert cfg.n_cells == 256 and cfg.t_end == 50.0
    assert cfg.profile.kind == "constant" and cfg.profile.u0_kind == "zero"
    assert cfg.snapshot_times == ()


def test_gamma_validation():
    with pytest.raises(ConfigError, match="gamma must exceed 1"):
        parse_config(MINIMAL.replace("gamma = 2.0", "gamma = 0.9"))


def test_unknown_keys_are_listed():
    with pytest.raises(ConfigError, match="unknown config keys: colour, viscosity"):
        parse_config(MINIMAL + 'viscosity = 3\ncolour = "red"\n')


def test_missing_required():
    with pytest.raises(ConfigError, match="missing required config keys: n_cells"):
        parse_config(MINIMAL.replace("n_cells = 256", ""))


@pytest.mark.parametrize(
    "line, msg",
    [("n_cells = 4", "n_cells"), ("t_end = -1.0", "t_end"), ("sample_every = 0.0", "sample_every"),
     ('scheme = "euler"', "scheme"), ("cfl = 0.0", "cfl"), ('profile = "cubic"', "profile")],
)
def test_field_specific_errors(line, msg):
    key = line.split(" = ")[0]
    doc = "\n".join(ln for ln in MINIMAL.splitlines() if not ln.startswith(key + " ")) + "\n" + line + "\n"
    with pytest.raises(ConfigError, match=msg):
        parse_config(doc)


def test_malformed_document():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("gamma = = 2")


def test_load_missing_file(tmp_path: Path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


def test_profile_specific_keys():
    doc = MINIMAL.replace('profile = "constant"', 'profile = "gaussian-bump"') + (
        "bump_amplitude = 0.5\nbump_width = 0.2\nu0 = \"linear\"\nu0_slope = 0.1\n")
    cfg = parse_config(doc)
    assert cfg.profile.params["amplitude"] == 0.5 and cfg.profile.params["width"] == 0.2
    assert cfg.profile.u0_params == {"slope": 0.1}


def test_serialized_keys_are_known():
    assert set(to_mapping(parse_config(MINIMAL))) == set(KEYS)


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(
    gamma=st.floats(1.05, 4.0), mu=st.floats(0.01, 10.0), dim=st.sampled_from([2, 3]),
    profile=st.sampled_from(["constant", "parabolic", "gaussian-bump"]), a0=st.floats(0.1, 5.0),
    cfl=st.floats(0.01, 1.0), scheme=st.sampled_from(["semi_implicit", "picard"]),
    n_cells=st.integers(8, 4096), t_end=st.floats(0.0, 1e3), sample_every=st.floats(1e-3, 10.0),
    snaps=st.lists(st.floats(0.0, 100.0), max_size=4), seed=st.integers(0, 2**31),
    slope=finite, tol=st.floats(1e-16, 1e-3), iters=st.integers(1, 500),
)
@settings(max_examples=60, deadline=None)
def test_round_trip(gamma, mu, dim, profile, a0, cfl, scheme, n_cells, t_end, sample_every, snaps, seed, slope,
                    tol, iters):
    doc = {
        "gamma": gamma, "mu": mu, "dim": dim, "profile": profile, "a0": a0, "cfl": cfl, "scheme": scheme,
        "n_cells": n_cells, "t_end": t_end, "sample_every": sample_every, "snapshot_times": snaps, "seed": seed,
        "u0": "linear", "u0_slope": slope, "picard_tol": tol, "picard_max_iter": iters, "output_dir": "runs/x",
    }
    import tomli_w

    cfg = parse_config(tomli_w.dumps(doc))
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text
