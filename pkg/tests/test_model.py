import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vec_offload.model import (
    FRAMEWORK_MASKS,
    PRESETS,
    InvalidValue,
    ScenarioError,
    TechKind,
    UnknownPreset,
    check_allocation,
    default_scenario,
    dump_scenario,
    equal_share_allocation,
    load_scenario,
    load_scenario_ref,
    local_allocation,
    validate,
)

MINIMAL = """
[[task]]
lambda = 10
burstiness = 5
t_max = 1
"""


def test_default_preset_task_four():
    t = default_scenario("default").tasks[4]
    assert (t.arrival_rate, t.burstiness, t.t_max) == (8, 10, 1)


def test_light_preset_is_uniform():
    s = default_scenario("light")
    assert s.n_tasks == 5
    assert all((t.arrival_rate, t.burstiness) == (5, 2) for t in s.tasks)


def test_unknown_preset_rejected():
    with pytest.raises(UnknownPreset):
        default_scenario("frobnicate")


@pytest.mark.parametrize("name", PRESETS)
def test_presets_validate_clean(name):
    assert validate(default_scenario(name)) == []


def test_validate_flags_processor_ordering():
    s = dataclasses.replace(default_scenario(), theta_epc=10.0, theta_veh=100.0)
    assert validate(s) == ["theta_epc < theta_veh"]


def test_validate_flags_empty_task_list():
    s = dataclasses.replace(default_scenario(), tasks=())
    assert validate(s) == ["tasks empty"]


def test_validate_requires_local_in_mask():
    s = default_scenario().with_mask({TechKind.CV2I})
    assert "tech_mask missing LOCAL" in validate(s)


def test_load_passes_vehicle_count_through():
    s = load_scenario("n_vehicles = 1\n" + MINIMAL)
    assert s.n_vehicles == 1
    assert s.n_tasks == 1


def test_load_rejects_negative_theta_with_key():
    with pytest.raises(InvalidValue) as info:
        load_scenario("theta = -1\n" + MINIMAL)
    assert info.value.key == "theta"


def test_missing_mac_section_gets_defaults():
    s = load_scenario(MINIMAL)
    assert s.mac.w0 == 16
    assert s.mac.backoff_threshold == 5


def test_load_rejects_unknown_key():
    with pytest.raises(InvalidValue) as info:
        load_scenario("colour = 3\n" + MINIMAL)
    assert info.value.key == "colour"


def test_load_rejects_task_missing_deadline():
    with pytest.raises(InvalidValue) as info:
        load_scenario("[[task]]\nlambda = 1\nburstiness = 1\n")
    assert info.value.key == "task[0].t_max"


def test_parse_error_is_scenario_error():
    with pytest.raises(ScenarioError):
        load_scenario("theta = = 2")


def test_mask_by_framework_name_sets_rmmw_flag():
    s = load_scenario('tech_mask = "CV2X-RMMW"\n' + MINIMAL)
    assert s.tech_mask == FRAMEWORK_MASKS["CV2X-RMMW"]
    assert s.rmmw_control


def test_mac_and_task_fields_parse():
    text = """
    r_dsrc = 500
    [mac]
    w0 = 32
    backoff_threshold = 3
    [[task]]
    lambda = 4
    burstiness = 2
    t_max = 0.5
    priority = 2
    fee_veh = 0.5
    """
    s = load_scenario(text)
    assert s.r_dsrc == 500
    assert (s.mac.w0, s.mac.backoff_threshold, s.mac.retry_limit) == (32, 3, 7)
    t = s.tasks[0]
    assert (t.arrival_rate, t.priority, t.fee_veh, t.fee_infra) == (4, 2, 0.5, 1)


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("mask", sorted(FRAMEWORK_MASKS))
def test_dump_load_round_trip(name, mask):
    s = default_scenario(name).with_mask(mask)
    assert load_scenario(dump_scenario(s)) == s


def test_load_scenario_ref_reads_files(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text(MINIMAL)
    assert load_scenario_ref(str(p)).n_tasks == 1
    assert load_scenario_ref("heavy") == default_scenario("heavy")


def test_volumes_use_horizon():
    s = dataclasses.replace(default_scenario(), horizon=2.0)
    assert s.volumes()[0] == 2 * 20 + 60


def test_with_tasks_broadcasts_scalars_and_sequences():
    s = default_scenario().with_tasks(arrival_rate=3.0, t_max=[1, 2, 3, 4, 5])
    assert list(s.column("arrival_rate")) == [3.0] * 5
    assert list(s.column("t_max")) == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("mask", sorted(FRAMEWORK_MASKS))
def test_reference_allocations_are_valid(mask):
    s = default_scenario().with_mask(mask)
    assert check_allocation(local_allocation(s), s) == []
    eq = equal_share_allocation(s)
    assert check_allocation(eq, s) == []
    assert np.allclose(eq[:, list(s.masked_techs)], 1 / len(s.tech_mask))


def test_check_allocation_flags_unmasked_mass():
    s = default_scenario().with_mask("DSRC-CMMW")
    rho = local_allocation(s)
    rho[0] = 0.0
    rho[0, TechKind.CV2I] = 1.0
    assert check_allocation(rho, s)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(1, 1e4))
def test_theta_sign_decides_validity(theta, rate):
    s = dataclasses.replace(default_scenario(), theta=theta, r_dsrc=rate)
    assert ("theta <= 0" in validate(s)) == (theta <= 0)
