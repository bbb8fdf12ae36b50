import pytest

from bilapfreq.config import CHECKS, ConfigError, load_config, parse_config

BASE = {"case": {"name": "harmonic_k1"}, "checks": ["H-prime"]}


def cfg(**over):
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in BASE.items()}
    raw.update(over)
    return raw


def test_defaults():
    c = parse_config(cfg())
    assert c.points == [129] and c.extent == 0.5 and c.count == 12
    assert c.order_tolerance == 0.05 and c.output == "out"


def test_full_file(tmp_path):
    p = tmp_path / "e.toml"
    p.write_text('checks = ["order", "doubling"]\nseed = 4\n'
                 '[case]\nname = "eigen_mu2"\n'
                 '[grid]\npoints_per_axis = [33, 65]\nextent = 0.5\n'
                 '[radii]\nmin = 0.1\nmax = 0.4\nratio = 1.1\n'
                 '[budgets]\ncaccioppoli = 2.0\n')
    c = load_config(p)
    assert c.points == [33, 65] and c.ratio == 1.1 and c.count is None
    assert c.budgets == {"caccioppoli": 2.0} and c.seed == 4


@pytest.mark.parametrize("raw, msg", [
    (cfg(bogus=1), "unknown top-level keys"),
    (cfg(grid={"points": 33}), r"unknown keys in \[grid\]"),
    (cfg(checks=["nope"]), "unknown check 'nope'"),
    (cfg(checks=[]), "nonempty"),
    (cfg(checks=["order", "order"]), "duplicate"),
    ({"checks": ["order"]}, r"missing \[case\]"),
    ({"case": {"name": "x"}}, "missing 'checks'"),
    (cfg(case={"name": "a", "manufactured": "x1"}), "exactly one"),
    (cfg(case={"name": "a", "floor": 0.1}), "only applies"),
    (cfg(case={"solve": True}), r"requires a \[solve\] table"),
    (cfg(grid={"points_per_axis": 32}), "odd"),
    (cfg(grid={"points_per_axis": [65, 33]}), "ascending"),
    (cfg(grid={"extent": -1.0}), "positive"),
    (cfg(grid={"extent": "wide"}), "finite number"),
    (cfg(radii={"min": 0.4, "max": 0.1}), "radii.min < radii.max"),
    (cfg(radii={"count": 8, "ratio": 1.1}), "not both"),
    (cfg(radii={"count": 3}), ">= 4"),
    (cfg(radii={"ratio": 1.0}), "exceed 1"),
    (cfg(budgets={"caccioppolli": 1.0}), "unknown budget keys"),
    (cfg(family={"mus": [2]}), "at least two"),
    (cfg(solve={"exact": 3}), "expression string"),
    (cfg(solve={"exact": "x1", "method": "cg"}), "stationary or gmres"),
    (cfg(seed=1.5), "integer"),
    (cfg(order={"r_max": 0.0}), "order.r_max must be positive"),
])
def test_validation_errors(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(raw)


def test_residuals_need_three_resolutions_or_budgets():
    with pytest.raises(ConfigError, match="three resolutions"):
        parse_config(cfg(checks=["residuals"], grid={"points_per_axis": [33, 65]}))
    parse_config(cfg(checks=["residuals"], grid={"points_per_axis": [17, 33, 65]}))
    parse_config(cfg(checks=["residuals"], budgets={"residual-second": 1.0,
                                                    "residual-biharmonic": 1.0}))


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("checks = [")
    with pytest.raises(ConfigError, match="not valid TOML"):
        load_config(bad)


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)
    assert "order" in CHECKS and "frequency-scaling" in CHECKS
