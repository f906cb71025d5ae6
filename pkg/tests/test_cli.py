import json
import os

import numpy as np
import pytest

from bayescdm.cli import (
    EXIT_DIMENSION,
    EXIT_NONCONVERGED,
    EXIT_OK,
    EXIT_PARSE,
    ConfigError,
    load_config,
    main,
)
from bayescdm.core import QMatrix, enumerate_patterns
from bayescdm.latent import UnstructuredLatent
from bayescdm.models import DinaParams
from bayescdm.simulate import SimDesign, simulate_responses

Q_ROWS = [
    [1, 0], [0, 1], [1, 1], [1, 0], [0, 1], [1, 1],
]


@pytest.fixture
def workdir(tmp_path):
    q = QMatrix(np.array(Q_ROWS))
    space = enumerate_patterns(q)
    rng = np.random.default_rng(0)
    params = DinaParams(rng.uniform(0.08, 0.2, 6), rng.uniform(0.08, 0.2, 6))
    design = SimDesign(kind="dina", q=q, n_persons=150, seed=1,
                       item_params=params,
                       structure=UnstructuredLatent(np.full(4, 0.25)))
    y, alpha, _ = simulate_responses(design)
    np.savetxt(tmp_path / "Q.csv", q.entries, fmt="%d", delimiter=",")
    np.savetxt(tmp_path / "Y.csv", y.entries, fmt="%d", delimiter=",")
    return tmp_path


def write_config(path, **kv):
    lines = [f"{k} = {v}" for k, v in kv.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def base_config(workdir, **extra):
    kv = dict(
        model="dina",
        q_matrix=workdir / "Q.csv",
        responses=workdir / "Y.csv",
        output_dir=workdir / "out",
        n_chains=2,
        n_iter=300,
        n_burnin=150,
        seed=11,
    )
    kv.update(extra)
    return write_config(workdir / "run.cfg", **kv)


class TestConfigParsing:
    def test_round_trip_and_types(self, workdir):
        cfg = base_config(workdir, thin=2, monitor="s,g,pai,c", delta="1")
        rc = load_config(cfg)
        assert rc.model == "dina"
        assert rc.thin == 2
        assert rc.monitor == ("s", "g", "pai", "c")
        assert rc.delta == (1.0,)

    def test_set_overrides_win(self, workdir):
        cfg = base_config(workdir)
        rc = load_config(cfg, ["n_iter=500", "seed=99"])
        assert rc.n_iter == 500
        assert rc.seed == 99

    def test_unknown_key_rejected(self, workdir):
        cfg = base_config(workdir)
        (workdir / "bad.cfg").write_text(cfg.read_text() + "nonsense_key = 1\n")
        with pytest.raises(ConfigError):
            load_config(workdir / "bad.cfg")

    def test_unknown_model_rejected(self, workdir):
        cfg = base_config(workdir, model="mystery")
        with pytest.raises(ConfigError):
            load_config(cfg)

    def test_prior_overrides_parsed(self, workdir):
        cfg = base_config(workdir, slip_a=1.0, slip_b=3.0)
        rc = load_config(cfg)
        assert rc.prior_spec().slip_b == 3.0

    def test_comments_and_blank_lines(self, workdir):
        p = workdir / "c.cfg"
        p.write_text("# a comment\n\nmodel = dina  # trailing\n")
        rc = load_config(p)
        assert rc.model == "dina"

    def test_missing_file_is_parse_error(self, workdir):
        with pytest.raises(ConfigError):
            load_config(workdir / "absent.cfg")

    def test_env_var_default_output_dir(self, workdir, monkeypatch):
        monkeypatch.setenv("BAYESCDM_OUTDIR", str(workdir / "envout"))
        p = write_config(workdir / "min.cfg", model="dina")
        rc = load_config(p)
        assert rc.output_dir == str(workdir / "envout")


class TestFitCommand:
    def test_writes_full_file_set(self, workdir):
        cfg = base_config(workdir)
        assert main(["fit", "--config", str(cfg)]) == EXIT_OK
        out = workdir / "out"
        for stem in ("pattern", "itempar", "summary", "DIC", "deviance", "ppp", "time"):
            assert (out / f"{stem}_DINA.txt").exists(), stem
        pattern = np.loadtxt(out / "pattern_DINA.txt")
        assert pattern.shape == (150,)
        assert pattern.min() >= 1 and pattern.max() <= 4
        itempar = np.loadtxt(out / "itempar_DINA.txt")
        assert itempar.shape == (6, 4)  # mean g, mean s, sd g, sd s
        summary = (out / "summary_DINA.txt").read_text().strip().split("\n")
        names = [line.split()[0] for line in summary[1:]]
        assert sum(n.startswith("s[") for n in names) == 6
        assert sum(n.startswith("g[") for n in names) == 6
        assert sum(n.startswith("pai[") for n in names) == 4
        assert "deviance" in names
        for stem in ("DIC", "deviance", "ppp", "time"):
            value = float((out / f"{stem}_DINA.txt").read_text())
            assert np.isfinite(value)
        assert 0.0 <= float((out / "ppp_DINA.txt").read_text()) <= 1.0

    def test_byte_identical_reruns(self, workdir):
        cfg = base_config(workdir)
        assert main(["fit", "--config", str(cfg), "--set",
                     f"output_dir={workdir / 'out1'}"]) == EXIT_OK
        assert main(["fit", "--config", str(cfg), "--set",
                     f"output_dir={workdir / 'out2'}"]) == EXIT_OK
        for stem in ("pattern", "itempar", "summary", "DIC", "deviance", "ppp"):
            a = (workdir / "out1" / f"{stem}_DINA.txt").read_bytes()
            b = (workdir / "out2" / f"{stem}_DINA.txt").read_bytes()
            assert a == b, stem

    def test_empty_responses_parse_error_no_partial_output(self, workdir):
        (workdir / "Y.csv").write_text("")
        cfg = base_config(workdir)
        assert main(["fit", "--config", str(cfg)]) == EXIT_PARSE
        assert not (workdir / "out").exists()

    def test_dimension_mismatch_exit_code(self, workdir):
        y = np.loadtxt(workdir / "Y.csv", delimiter=",")
        np.savetxt(workdir / "Y.csv", y[:, :4], fmt="%d", delimiter=",")
        cfg = base_config(workdir)
        assert main(["fit", "--config", str(cfg)]) == EXIT_DIMENSION

    def test_np_override_feeds_aic(self, workdir, capsys):
        cfg = base_config(workdir, np_override=91)
        assert main(["fit", "--config", str(cfg)]) == EXIT_OK
        line = capsys.readouterr().out
        dbar = float((workdir / "out" / "deviance_DINA.txt").read_text())
        assert f"np=91" in line
        aic = float(line.split("aic=")[1].split()[0])
        assert aic == pytest.approx(dbar + 91, abs=0.01)

    def test_monitor_restricts_summary(self, workdir):
        cfg = base_config(workdir, monitor="s,c")
        assert main(["fit", "--config", str(cfg)]) == EXIT_OK
        summary = (workdir / "out" / "summary_DINA.txt").read_text()
        assert "g[1]" not in summary
        assert "s[1]" in summary

    def test_bad_monitor_family(self, workdir):
        cfg = base_config(workdir, monitor="s,nonexistent")
        assert main(["fit", "--config", str(cfg)]) == EXIT_PARSE

    def test_testlet_requires_ids(self, workdir):
        cfg = base_config(workdir, model="testlet-dina")
        assert main(["fit", "--config", str(cfg)]) == EXIT_PARSE

    def test_testlet_id_length_mismatch(self, workdir):
        cfg = base_config(workdir, model="testlet-dina",
                          testlet_ids="1,1,2,2", n_testlets=2)
        assert main(["fit", "--config", str(cfg)]) == EXIT_DIMENSION

    def test_pattern_space_audit_file(self, workdir):
        cfg = base_config(workdir, write_pattern_space="true")
        assert main(["fit", "--config", str(cfg)]) == EXIT_OK
        pats = np.loadtxt(workdir / "out" / "patterns_DINA.csv", delimiter=",")
        assert pats.shape == (4, 2)


class TestSimulateCommand:
    def test_simulate_then_fit_round_trip(self, workdir):
        truth = {
            "slip": [0.1] * 6,
            "guess": [0.1] * 6,
            "mixing": [0.25, 0.25, 0.25, 0.25],
        }
        (workdir / "truth.json").write_text(json.dumps(truth))
        sim_cfg = write_config(
            workdir / "sim.cfg",
            model="dina", q_matrix=workdir / "Q.csv",
            output_dir=workdir / "sim", n_persons=200, seed=5,
            true_params=workdir / "truth.json")
        assert main(["simulate", "--config", str(sim_cfg)]) == EXIT_OK
        for stem in ("Y_DINA.csv", "alpha_DINA.csv", "truth_DINA.json"):
            assert (workdir / "sim" / stem).exists()
        y = np.loadtxt(workdir / "sim" / "Y_DINA.csv", delimiter=",")
        assert y.shape == (200, 6)
        written = json.loads((workdir / "sim" / "truth_DINA.json").read_text())
        assert written["slip"] == truth["slip"]
        assert len(written["realized_classes"]) == 200
        fit_cfg = write_config(
            workdir / "fit2.cfg",
            model="dina", q_matrix=workdir / "Q.csv",
            responses=workdir / "sim" / "Y_DINA.csv",
            output_dir=workdir / "out2", n_iter=400, n_burnin=200, seed=3)
        assert main(["fit", "--config", str(fit_cfg)]) == EXIT_OK

    def test_simulate_requires_truth_file(self, workdir):
        cfg = write_config(workdir / "s.cfg", model="dina",
                           q_matrix=workdir / "Q.csv", n_persons=50,
                           output_dir=workdir / "s")
        assert main(["simulate", "--config", str(cfg)]) == EXIT_PARSE

    def test_simulate_deterministic(self, workdir):
        truth = {"slip": [0.1] * 6, "guess": [0.1] * 6}
        (workdir / "truth.json").write_text(json.dumps(truth))
        for target in ("simA", "simB"):
            cfg = write_config(
                workdir / f"{target}.cfg",
                model="dina", q_matrix=workdir / "Q.csv",
                output_dir=workdir / target, n_persons=100, seed=8,
                true_params=workdir / "truth.json")
            assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
        a = (workdir / "simA" / "Y_DINA.csv").read_bytes()
        b = (workdir / "simB" / "Y_DINA.csv").read_bytes()
        assert a == b


class TestPreflightCommand:
    def test_well_behaved_toy_converges_quickly(self, workdir, capsys):
        cfg = base_config(workdir, n_iter=1000)
        assert main(["preflight", "--config", str(cfg)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "converged=True" in out
        assert "iterations=1000" in out

    def test_identical_chain_seeds_flagged_degenerate(self, workdir, capsys, monkeypatch):
        import bayescdm.cli as cli_mod

        cfg = base_config(workdir, n_iter=400)
        rc = load_config(cfg)
        original = rc.mcmc_config()

        def rigged_mcmc(self):
            from bayescdm.sampler import McmcConfig
            return McmcConfig(n_chains=2, n_iter=400, n_burnin=200,
                              chain_seeds=(7, 7))

        monkeypatch.setattr(cli_mod.RunConfig, "mcmc_config", rigged_mcmc)
        code = main(["preflight", "--config", str(cfg)])
        out = capsys.readouterr().out
        assert "degenerate" in out
        assert code == EXIT_OK

    def test_non_mixing_sampler_flagged_after_cap(self, workdir, capsys):
        # rigged non-mixing chains: frozen tiny proposals from overdispersed
        # starts cannot cross between modes, so R-hat stays large
        cfg = base_config(
            workdir, model="rdina", n_iter=400, adapt_iters=0,
            extend_rounds=2, extend_increment=200, monitor="lambda0",
        )
        with open(cfg, "a", encoding="utf-8") as fh:
            fh.write("proposal_sd.intercept = 1e-6\n")
            fh.write("proposal_sd.kway = 1e-6\n")
        code = main(["preflight", "--config", str(cfg)])
        out = capsys.readouterr().out
        assert code == EXIT_NONCONVERGED
        assert "converged=False" in out


class TestCliEntrypoint:
    def test_requires_subcommand(self):
        with pytest.raises(SystemExit):
            main([])

    def test_bad_set_syntax(self, workdir):
        cfg = base_config(workdir)
        assert main(["fit", "--config", str(cfg), "--set", "oops"]) == EXIT_PARSE
