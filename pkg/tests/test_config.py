import pytest
import yaml

from mcastsim.config import (ConfigError, MulticastMode, Role, StationSpec, config_from_dict,
                             config_to_dict, dump_config, load_config)
from mcastsim.experiments import distance_fading, mobile, static_fairness
from mcastsim.mobility import RandomWaypoint, Static

MINIMAL = {
    "stations": [
        {"name": "ap", "role": "ap"},
        {"name": "r", "role": "multicast_receiver", "mobility": {"static": [10, 0]}},
        {"name": "u", "role": "unicast_station", "mobility": {"static": [0, 10]}},
    ],
    "traffic": [
        {"kind": "saturated_multicast"},
        {"kind": "saturated_unicast", "src": "u", "dst": "ap"},
    ],
}


def problems_of(data):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(data)
    return dict(exc.value.problems)


def test_minimal_defaults():
    cfg = config_from_dict(MINIMAL)
    assert cfg.multicast_mode is MulticastMode.RRAM
    assert cfg.stations[1].mobility == Static(10.0, 0.0)
    assert cfg.traffic[0].packet_bytes == 1500


@pytest.mark.parametrize("builder", [
    lambda: config_from_dict(MINIMAL),
    lambda: static_fairness("legacy", 5, seed=3),
    lambda: distance_fading("lb-arf", 70),
    lambda: mobile("rram", 10, 3.0),
])
def test_roundtrip_through_yaml(builder):
    cfg = builder()
    again = config_from_dict(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert config_to_dict(again) == config_to_dict(cfg)


def test_shipped_configs_load():
    from pathlib import Path
    files = sorted(Path(__file__).parent.parent.joinpath("configs").glob("*.yaml"))
    assert files
    for f in files:
        load_config(f)


def test_all_problems_reported_at_once():
    data = dict(MINIMAL, duration_s="long", multicast_mode="turbo", bogus=1, rate_fixed=11,
                channel={"ricean_k": -2, "nope": 1})
    probs = problems_of(data)
    for key in ("duration_s", "multicast_mode", "bogus", "rate_fixed", "channel.ricean_k", "channel.nope"):
        assert key in probs, key


def test_needs_exactly_one_ap():
    data = dict(MINIMAL, stations=MINIMAL["stations"] + [{"name": "ap2", "role": "ap"}])
    assert "stations" in problems_of(data)


def test_unicast_traffic_checks():
    data = dict(MINIMAL, traffic=[{"kind": "saturated_unicast", "src": "r", "dst": "u"}])
    probs = problems_of(data)
    assert "traffic[0].src" in probs and "traffic[0].dst" in probs


def test_cbr_needs_interval_and_single_multicast_source():
    data = dict(MINIMAL, traffic=[{"kind": "multicast_cbr"}, {"kind": "saturated_multicast"}])
    probs = problems_of(data)
    assert "traffic[0].interval_s" in probs and "traffic" in probs


def test_bad_mobility_and_duplicates():
    data = dict(MINIMAL, stations=MINIMAL["stations"] + [
        {"name": "r", "role": "multicast_receiver", "mobility": {"random_waypoint": {"v_min": 5, "v_max": 1}}}])
    probs = problems_of(data)
    assert "stations[3].name" in probs
    assert any(k.startswith("stations[3].mobility") for k in probs)


def test_unknown_role_and_non_mapping():
    assert "stations[1].role" in problems_of(dict(MINIMAL, stations=[{"role": "ap"}, {"role": "router"}]))
    assert "stations[0]" in problems_of(dict(MINIMAL, stations=["ap"]))
    with pytest.raises(ConfigError):
        config_from_dict(["not", "a", "mapping"])


def test_lep_report_source_validated():
    assert "lep.report_sinr" in problems_of(dict(MINIMAL, lep={"report_sinr": "peak"}))
    cfg = config_from_dict(dict(MINIMAL, lep={"report_sinr": "ewma"}))
    assert cfg.lep.report_sinr == "ewma"


def test_non_numeric_fields():
    probs = problems_of(dict(MINIMAL, seed="x", traffic=[{"kind": "saturated_multicast", "packet_bytes": "big"}]))
    assert "seed" in probs and "traffic[0].packet_bytes" in probs


def test_with_and_station_index():
    cfg = config_from_dict(MINIMAL)
    assert cfg.station_index("u") == 2
    with pytest.raises(KeyError):
        cfg.station_index("zz")
    assert cfg.with_(seed=9).seed == 9


def test_empty_station_list_is_valid():
    cfg = config_from_dict({})
    assert cfg.stations == ()


def test_waypoint_yaml():
    data = dict(MINIMAL, stations=MINIMAL["stations"][:1] + [
        {"name": "m", "role": "multicast_receiver",
         "mobility": {"random_waypoint": {"width": 50, "height": 50, "v_max": 2}}}])
    cfg = config_from_dict(dict(data, traffic=[{"kind": "saturated_multicast"}]))
    assert isinstance(cfg.stations[1].mobility, RandomWaypoint)
    assert cfg.stations[1].role is Role.MULTICAST_RECEIVER
    assert isinstance(cfg.stations[0], StationSpec)


def test_non_numeric_position():
    data = dict(MINIMAL, stations=[{"name": "ap", "role": "ap", "mobility": {"static": ["a", 0]}}], traffic=[])
    assert "stations[0].mobility.static[0]" in problems_of(data)
