"""Sequence assembly, timing bookkeeping, end-to-end runs, manifests."""
import numpy as np
import pytest

from shaken_lattice import bloch
from shaken_lattice.propagator import BasisOverflowError, PropagationSettings
from shaken_lattice.protocols import ShakingProtocol, random_protocol, save_protocol
from shaken_lattice.sequencer import (
    SequencePlan,
    Stage,
    load_manifest,
    michelson_plan,
    reciprocal_plan,
    run_prefix,
    run_sequence,
    save_manifest,
    scan_ac_response,
    scan_dc_response,
)
from shaken_lattice.units import SignalSpec, normalized_variation

pytestmark = pytest.mark.filterwarnings("ignore::shaken_lattice.bloch.TruncationWarning")

FAST = PropagationSettings(order=2)


def flat_stages(duration_s=5.02e-4):
    p = ShakingProtocol(np.zeros(200), duration_s=duration_s)
    return {name: p for name in ("split", "propagate", "reflect", "recombine")}


class TestPlanStructure:
    def test_michelson_timing(self):
        plan = michelson_plan(flat_stages(), legs=2)
        assert plan.interrogation_s == pytest.approx(2.008e-3, rel=1e-12)
        assert plan.duration_s == pytest.approx(3.514e-3, rel=1e-12)
        assert plan.topology == "michelson"

    def test_reciprocal_timing_matches_michelson_interrogation(self):
        plan = reciprocal_plan(flat_stages(), legs=1)
        assert plan.interrogation_s == pytest.approx(2.008e-3, rel=1e-12)
        assert plan.duration_s == pytest.approx(4.016e-3, rel=1e-12)
        # reciprocal path spends the same time interrogating as michelson legs=2
        assert plan.interrogation_s == michelson_plan(flat_stages(), 2).interrogation_s

    def test_drive_expands_repeats(self):
        plan = michelson_plan(flat_stages(), legs=2)
        drive = plan.drive()
        assert len(drive) == 7
        assert drive.labels == ("split", "propagate", "propagate", "reflect",
                                "propagate", "propagate", "recombine")
        assert drive.duration_s == pytest.approx(plan.duration_s)

    def test_topology_stage_order_enforced(self):
        p = flat_stages()["split"]
        with pytest.raises(ValueError, match="michelson sequence"):
            SequencePlan(stages=(Stage("split", p), Stage("recombine", p)),
                         topology="michelson")
        with pytest.raises(ValueError, match="unknown topology"):
            SequencePlan(stages=(Stage("split", p),), topology="sagnac")

    def test_replace_stage(self):
        plan = michelson_plan(flat_stages(), legs=2)
        other = random_protocol(seed=1)
        updated = plan.replace_stage("recombine", other)
        assert updated.stages[-1].protocol is other
        assert all(s.protocol is not other for s in updated.stages[:-1])

    def test_stage_validation(self):
        with pytest.raises(ValueError, match="unknown stage"):
            Stage("teleport", flat_stages()["split"])
        with pytest.raises(ValueError):
            Stage("split", flat_stages()["split"], repeat=0)


class TestRunSequence:
    def test_flat_sequence_leaves_ground_state_alone(self, lattice, ground_pops):
        plan = michelson_plan(flat_stages(), legs=2)
        final = run_sequence(plan, lattice, SignalSpec.none(), FAST)
        assert normalized_variation(final, ground_pops) < 1e-6
        assert final.residual_offset == 0.0

    def test_prefix_of_all_stages_matches_full_run(self, lattice):
        plan = michelson_plan(flat_stages(), legs=2)
        state = run_prefix(plan, lattice, len(plan.stages), SignalSpec.none(), FAST)
        pops, full_state = run_sequence(plan, lattice, SignalSpec.none(), FAST,
                                        return_state=True)
        assert np.array_equal(state.amplitudes, full_state.amplitudes)
        assert state.time_s == full_state.time_s

    def test_signal_offset_recorded_coherently(self, lattice):
        plan = michelson_plan(flat_stages(), legs=2)
        signal = SignalSpec.sinusoid(a_x=0.115, omega=2 * np.pi * 3000.0)
        pops = run_sequence(plan, lattice, signal, FAST)
        assert pops.residual_offset == pytest.approx(
            signal.quasimomentum(plan.duration_s, lattice), abs=1e-12)

    def test_dc_response_grows_continuously_from_zero(self, lattice):
        plan = michelson_plan(flat_stages(), legs=2)
        rows = scan_dc_response(plan, lattice, [0.0, 1e-4, 1e-2, 0.5], FAST)
        d = rows[:, 1]
        assert d[0] == 0.0
        assert d[1] < 1e-4            # tiny signal, tiny response
        assert d[1] < d[2] < d[3]     # monotone growth over decades

    def test_stage_attribution_in_errors(self, lattice):
        stages = flat_stages()
        hot = random_protocol(seed=42)
        stages["reflect"] = hot.with_amplitudes(3.0 * hot.amplitudes)
        plan = michelson_plan(stages, legs=2)
        with pytest.raises(BasisOverflowError, match="reflect"):
            run_sequence(plan, lattice, SignalSpec.none(), FAST)


class TestScans:
    def test_zero_amplitude_scan_is_identically_zero(self, lattice):
        plan = michelson_plan(flat_stages(), legs=2)
        rows = scan_ac_response(plan, lattice, 0.0, [500.0, 1000.0], FAST)
        assert np.all(rows[:, 1] == 0.0)

    def test_empty_grid_rejected(self, lattice):
        plan = michelson_plan(flat_stages(), legs=2)
        with pytest.raises(ValueError, match="empty"):
            scan_ac_response(plan, lattice, 0.1, [], FAST)

    def test_rows_carry_requested_frequencies(self, lattice):
        plan = michelson_plan(flat_stages(), legs=2)
        freqs = [750.0, 1500.0, 3000.0]
        rows = scan_ac_response(plan, lattice, 0.05, freqs, FAST)
        assert rows[:, 0].tolist() == freqs
        assert np.all(rows[:, 1] >= 0.0)


class TestManifest:
    def test_round_trip(self, tmp_path, lattice):
        stages = flat_stages()
        files = {}
        for name, proto in stages.items():
            path = tmp_path / f"{name}.json"
            save_protocol(proto, path)
            files[name] = path.name  # relative paths resolve against the manifest
        mpath = tmp_path / "sequence.json"
        save_manifest(files, "michelson", 2, mpath)
        plan = load_manifest(mpath)
        assert plan.topology == "michelson"
        assert plan.interrogation_s == pytest.approx(2.008e-3)

    def test_missing_stage_file_names_the_stage(self, tmp_path):
        stages = flat_stages()
        files = {}
        for name, proto in stages.items():
            path = tmp_path / f"{name}.json"
            save_protocol(proto, path)
            files[name] = path.name
        files["reflect"] = "nonexistent.json"
        mpath = tmp_path / "sequence.json"
        save_manifest(files, "michelson", 2, mpath)
        with pytest.raises(FileNotFoundError, match="reflect"):
            load_manifest(mpath)

    def test_manifest_without_stage_entry_rejected(self, tmp_path):
        mpath = tmp_path / "sequence.json"
        save_manifest({"split": "s.json"}, "michelson", 2, mpath)
        with pytest.raises(FileNotFoundError, match="propagate"):
            load_manifest(mpath)
