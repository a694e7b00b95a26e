"""End-to-end tests of the command-line front-end and its exit codes."""

import shutil

import pytest

from intfam.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    _parse_m_range,
    codec_sidecar_path,
    main,
    parse_kv_file,
)

THETA_TEXT = "bits 3\n2 0 0 2\n2 0 0 2\n"

CONFIG_TEXT = """\
# toy chain workload
label = c
learners = 2
batch_size = 5
rounds = 20
holdout_size = 100
bins = 4
budget = 1
seed = 3
protocol = {protocol}
schedule = {schedule}
sync_period = 1
delta = {delta}
"""


def write_config(path, protocol="none", schedule="periodic", delta=0):
    path.write_text(CONFIG_TEXT.format(protocol=protocol, schedule=schedule, delta=delta))
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Truth model -> synthetic CSV -> learned structure, all via the CLI."""
    ws = tmp_path_factory.mktemp("cli")
    (ws / "truth.structure").write_text("a 2 feature\nb 2 feature\nc 2 label\n0 1\n1 2\n")
    (ws / "truth.theta").write_text(THETA_TEXT)
    write_config(ws / "base.config")
    assert (
        main(
            [
                "synth",
                "--structure", str(ws / "truth.structure"),
                "--theta", str(ws / "truth.theta"),
                "--n", "600",
                "--out", str(ws / "data.csv"),
                "--seed", "1",
            ]
        )
        == EXIT_OK
    )
    assert (
        main(
            [
                "structure",
                "--config", str(ws / "base.config"),
                "--dataset", str(ws / "data.csv"),
                "--out", str(ws / "learned.structure"),
            ]
        )
        == EXIT_OK
    )
    return ws


class TestParseKvFile:
    def test_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# a comment\n\nkey = value\nother=1\n")
        assert parse_kv_file(p) == {"key": "value", "other": "1"}

    def test_duplicate_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("k=1\nk=2\n")
        with pytest.raises(UsageError, match="duplicate"):
            parse_kv_file(p)

    def test_malformed_line_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("just-some-words\n")
        with pytest.raises(UsageError, match="key=value"):
            parse_kv_file(p)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(UsageError, match="cannot read"):
            parse_kv_file(tmp_path / "absent.cfg")


class TestParseMRange:
    def test_comma_list(self):
        assert _parse_m_range("1,2,4") == [1, 2, 4]

    def test_span(self):
        assert _parse_m_range("1:5") == [1, 2, 3, 4, 5]

    def test_span_with_step(self):
        assert _parse_m_range("2:10:2") == [2, 4, 6, 8, 10]

    def test_bad_entry(self):
        with pytest.raises(UsageError):
            _parse_m_range("five")
        with pytest.raises(UsageError):
            _parse_m_range("5:1")

    def test_empty(self):
        with pytest.raises(UsageError):
            _parse_m_range(",")


class TestStructureCommand:
    def test_writes_structure_and_sidecar(self, workspace):
        structure = workspace / "learned.structure"
        assert structure.exists()
        assert codec_sidecar_path(structure).exists()
        text = structure.read_text()
        assert text.count("\n") == 5  # 3 variable lines + 2 edge lines

    def test_recovers_the_generating_chain(self, workspace):
        lines = (workspace / "learned.structure").read_text().splitlines()
        edges = {tuple(sorted(map(int, ln.split()))) for ln in lines[3:]}
        assert edges == {(0, 1), (1, 2)}

    def test_rerun_is_byte_identical(self, workspace, tmp_path):
        out = tmp_path / "again.structure"
        assert (
            main(
                [
                    "structure",
                    "--config", str(workspace / "base.config"),
                    "--dataset", str(workspace / "data.csv"),
                    "--out", str(out),
                ]
            )
            == EXIT_OK
        )
        assert out.read_bytes() == (workspace / "learned.structure").read_bytes()
        assert (
            codec_sidecar_path(out).read_bytes()
            == codec_sidecar_path(workspace / "learned.structure").read_bytes()
        )

    def test_missing_label_key_is_a_usage_error(self, workspace, tmp_path):
        cfg = tmp_path / "nolabel.config"
        cfg.write_text("learners = 2\nholdout_size = 100\n")
        code = main(
            [
                "structure",
                "--config", str(cfg),
                "--dataset", str(workspace / "data.csv"),
                "--out", str(tmp_path / "x.structure"),
            ]
        )
        assert code == EXIT_USAGE

    def test_unreadable_dataset_is_a_data_error(self, workspace, tmp_path):
        code = main(
            [
                "structure",
                "--config", str(workspace / "base.config"),
                "--dataset", str(tmp_path / "absent.csv"),
                "--out", str(tmp_path / "x.structure"),
            ]
        )
        assert code == EXIT_DATA


def run_experiment(workspace, out, config=None, structure=None, extra=()):
    return main(
        [
            "run",
            "--config", str(config or workspace / "base.config"),
            "--dataset", str(workspace / "data.csv"),
            "--structure", str(structure or workspace / "learned.structure"),
            "--out", str(out),
            *extra,
        ]
    )


class TestRunCommand:
    def test_results_shape_and_footer(self, workspace, tmp_path):
        out = tmp_path / "r.csv"
        assert run_experiment(workspace, out) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "t,cum_errors,cum_samples,bytes_up,bytes_down,violations,full_syncs,partial_syncs"
        assert len(lines) == 22  # header + 20 rounds + footer
        assert lines[-1].startswith("# final_error_rate=")
        assert "run_id=" in lines[-1]

    def test_no_protocol_means_zero_bytes(self, workspace, tmp_path):
        out = tmp_path / "r.csv"
        assert run_experiment(workspace, out) == EXIT_OK
        assert "total_bytes=0 " in out.read_text().splitlines()[-1]

    def test_two_runs_are_byte_identical(self, workspace, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_experiment(workspace, a) == EXIT_OK
        assert run_experiment(workspace, b) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_the_run(self, workspace, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_experiment(workspace, a) == EXIT_OK
        assert run_experiment(workspace, b, extra=["--seed", "9"]) == EXIT_OK
        id_a = a.read_text().splitlines()[-1].split("run_id=")[1]
        id_b = b.read_text().splitlines()[-1].split("run_id=")[1]
        assert id_a != id_b

    def test_threads_flag_does_not_change_output(self, workspace, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cfg = write_config(tmp_path / "p.config", protocol="private")
        assert run_experiment(workspace, a, config=cfg) == EXIT_OK
        assert run_experiment(workspace, b, config=cfg, extra=["--threads", "2"]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_missing_sidecar_refits_identically(self, workspace, tmp_path):
        bare = tmp_path / "bare.structure"
        shutil.copyfile(workspace / "learned.structure", bare)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_experiment(workspace, a) == EXIT_OK
        assert run_experiment(workspace, b, structure=bare) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_structure_dataset_mismatch_is_a_data_error(self, workspace, tmp_path):
        # the truth structure declares arity 2, the encoded dataset has a
        # missing state per column (arity 3), and no sidecar explains it
        code = run_experiment(workspace, tmp_path / "r.csv", structure=workspace / "truth.structure")
        assert code == EXIT_DATA

    def test_dataset_too_small_is_a_data_error(self, workspace, tmp_path):
        cfg = tmp_path / "huge.config"
        cfg.write_text("label = c\nlearners = 64\nbatch_size = 50\nholdout_size = 100\n")
        assert run_experiment(workspace, tmp_path / "r.csv", config=cfg) == EXIT_DATA

    def test_bad_threads_is_a_usage_error(self, workspace, tmp_path):
        assert run_experiment(workspace, tmp_path / "r.csv", extra=["--threads", "0"]) == EXIT_USAGE

    def test_delta_sweep_bytes_non_increasing(self, workspace, tmp_path):
        totals = []
        for delta in (0, 4, 784):
            cfg = write_config(
                tmp_path / f"d{delta}.config", protocol="private", schedule="dynamic", delta=delta
            )
            out = tmp_path / f"d{delta}.csv"
            assert run_experiment(workspace, out, config=cfg) == EXIT_OK
            footer = out.read_text().splitlines()[-1]
            totals.append(int(footer.split("total_bytes=")[1].split()[0]))
        assert totals == sorted(totals, reverse=True)


class TestSynthCommand:
    def test_deterministic_per_seed(self, workspace, tmp_path):
        outs = []
        for name, seed in (("s1.csv", "5"), ("s2.csv", "5"), ("s3.csv", "6")):
            assert (
                main(
                    [
                        "synth",
                        "--structure", str(workspace / "truth.structure"),
                        "--theta", str(workspace / "truth.theta"),
                        "--n", "50",
                        "--out", str(tmp_path / name),
                        "--seed", seed,
                    ]
                )
                == EXIT_OK
            )
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]
        assert outs[0] != outs[2]

    def test_row_count_and_header(self, workspace, tmp_path):
        out = tmp_path / "s.csv"
        main(
            [
                "synth",
                "--structure", str(workspace / "truth.structure"),
                "--theta", str(workspace / "truth.theta"),
                "--n", "7",
                "--out", str(out),
            ]
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "a,b,c"
        assert len(lines) == 8

    def test_zero_rows_is_a_usage_error(self, workspace, tmp_path):
        code = main(
            [
                "synth",
                "--structure", str(workspace / "truth.structure"),
                "--theta", str(workspace / "truth.theta"),
                "--n", "0",
                "--out", str(tmp_path / "s.csv"),
            ]
        )
        assert code == EXIT_USAGE

    def test_theta_without_bits_line_is_a_data_error(self, workspace, tmp_path):
        bad = tmp_path / "bad.theta"
        bad.write_text("5 0 0 5\n5 0 0 5\n")
        code = main(
            [
                "synth",
                "--structure", str(workspace / "truth.structure"),
                "--theta", str(bad),
                "--n", "5",
                "--out", str(tmp_path / "s.csv"),
            ]
        )
        assert code == EXIT_DATA

    def test_wrong_theta_length_is_a_data_error(self, workspace, tmp_path):
        bad = tmp_path / "short.theta"
        bad.write_text("bits 3\n5 0 0\n")
        code = main(
            [
                "synth",
                "--structure", str(workspace / "truth.structure"),
                "--theta", str(bad),
                "--n", "5",
                "--out", str(tmp_path / "s.csv"),
            ]
        )
        assert code == EXIT_DATA


class TestEnergyCommand:
    def test_default_preset_table(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["energy", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "m,central_wh,parallel_wh,ratio"
        assert len(lines) == 9
        assert lines[1].split(",")[0] == "1"

    def test_named_preset(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["energy", "--preset", "3g-high", "--out", str(out)]) == EXIT_OK

    def test_params_file(self, tmp_path):
        params = tmp_path / "p.params"
        params.write_text("wh_per_gb = 1.0\ncentral_gb = 2.0\nlocal_gb = 1.0\nlearners = 4\n")
        out = tmp_path / "e.csv"
        assert main(["energy", "--params", str(params), "--m-range", "4", "--out", str(out)]) == EXIT_OK
        row = out.read_text().splitlines()[1].split(",")
        assert float(row[3]) == pytest.approx(2.0, rel=1e-6)

    def test_params_and_preset_conflict(self, tmp_path):
        code = main(
            ["energy", "--params", "x", "--preset", "3g-low", "--out", str(tmp_path / "e.csv")]
        )
        assert code == EXIT_USAGE

    def test_unknown_preset(self, tmp_path):
        assert main(["energy", "--preset", "5g", "--out", str(tmp_path / "e.csv")]) == EXIT_USAGE


class TestExitCodes:
    def test_unknown_subcommand_is_usage(self):
        assert main(["defragment"]) == EXIT_USAGE

    def test_missing_required_flag_is_usage(self):
        assert main(["run"]) == EXIT_USAGE

    def test_no_arguments_is_usage(self):
        assert main([]) == EXIT_USAGE
