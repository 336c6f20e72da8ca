import json

import numpy as np
import pytest

from rembed.core.rembrandt import make_gapped_instance
from rembed.core.svmlight import save_svmlight
from rembed.main import HANDLERS, Command, RunConfig, build_parser, main


@pytest.fixture
def gapped_file(tmp_path):
    data, _ = make_gapped_instance(0, n=40, d=12, c=9, k=3)
    path = tmp_path / "gapped.svm"
    save_svmlight(data, path)
    return path


def dims(n_features: int, n_classes: int):
    return ["--features", str(n_features), "--classes", str(n_classes)]


class TestRunConfig:
    def test_required_paths(self):
        with pytest.raises(ValueError, match="--output"):
            RunConfig(command=Command.EMBED, input="x.svm")

    def test_parser_defaults(self):
        args = vars(build_parser().parse_args(["embed", "--input", "a", "--output", "b"]))
        args.pop("log_level")
        config = RunConfig(**args)
        cfg = config.embed_config()
        assert (cfg.p, cfg.q, cfg.seed) == (20, 1, 0)
        assert cfg.solver.ridge_lambda is None
        assert config.deterministic


class TestEmbedCommand:
    def test_same_seed_gives_identical_files(self, tmp_path, gapped_file):
        outputs = [tmp_path / "a.rembed", tmp_path / "b.rembed"]
        for out in outputs:
            argv = ["embed", "--input", str(gapped_file), "--output", str(out), "--k", "3", "--p", "2", "--seed", "11"]
            assert main(argv + dims(12, 9)) == 0
        assert outputs[0].read_bytes() == outputs[1].read_bytes()
        assert outputs[0].read_text().startswith("REMBED v1 9 3\n")

    def test_report_records_config(self, tmp_path, gapped_file):
        out = tmp_path / "emb.rembed"
        argv = ["embed", "--input", str(gapped_file), "--output", str(out), "--k", "2", "--q", "2", "--seed", "4"]
        assert main(argv) == 0
        report = json.loads((tmp_path / "emb.rembed.report.json").read_text())
        assert report["config"]["k"] == 2
        assert report["config"]["q"] == 2
        assert report["config"]["seed"] == 4
        assert len(report["sigma"]) == 2
        assert report["wall_time_s"] >= 0.0
        assert report["rng_algorithm"] == "pcg64+box-muller/v1"

    @pytest.mark.parametrize("method", ["cs", "oracle"])
    def test_baseline_methods(self, tmp_path, gapped_file, method):
        out = tmp_path / f"{method}.rembed"
        assert main(["embed", "--input", str(gapped_file), "--output", str(out), "--k", "3", "--method", method]) == 0
        assert out.read_text().splitlines()[0] == "REMBED v1 9 3"


def test_oracle_check_on_gapped_instance(gapped_file, capsys):
    argv = ["oracle-check", "--input", str(gapped_file), "--k", "3", "--p", "6", "--q", "5", "--ridge", "0"]
    assert main(argv + dims(12, 9)) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["max_principal_angle"] < 1e-6
    assert result["max_sigma_relative_delta"] < 1e-6


def test_evaluate_perfect_predictions(tmp_path, capsys):
    truth = tmp_path / "truth.svm"
    truth.write_text("2 1:1\n0 1:2\n1,3 2:1\n")
    predictions = tmp_path / "pred.txt"
    predictions.write_text("2 0\n0 1\n3 1\n")
    assert main(["evaluate", "--input", str(truth), "--predictions", str(predictions)]) == 0
    first = capsys.readouterr().out.splitlines()[0]
    assert first == "test_error=0.0000 precision_at_1=1.0000 n_eval=3"


def test_full_pipeline(tmp_path, capsys):
    train, test = tmp_path / "train.svm", tmp_path / "test.svm"
    emb, model, pred = tmp_path / "emb.rembed", tmp_path / "model.npz", tmp_path / "pred.txt"
    assert main(["synth", "--output", str(train), "--test-output", str(test), "--n", "200", "--d", "15",
                 "--c", "8", "--rank", "3", "--density", "0.3", "--seed", "2"]) == 0
    assert main(["embed", "--input", str(train), "--output", str(emb), "--k", "3", "--p", "2"] + dims(15, 8)) == 0
    assert main(["train", "--input", str(train), "--embedding", str(emb), "--output", str(model)] + dims(15, 8)) == 0
    assert main(["predict", "--input", str(test), "--model", str(model), "--output", str(pred), "--topk", "3"]) == 0
    assert all(len(line.split()) == 3 for line in pred.read_text().splitlines())
    capsys.readouterr()

    assert main(["evaluate", "--input", str(test), "--predictions", str(pred), "--classes", "8"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("test_error=")
    assert "n_eval=40" in out


def test_logistic_decoder(tmp_path):
    train, test = tmp_path / "train.svm", tmp_path / "test.svm"
    emb, model = tmp_path / "emb.rembed", tmp_path / "model.npz"
    assert main(["synth", "--output", str(train), "--test-output", str(test), "--n", "100", "--d", "10",
                 "--c", "5", "--rank", "2", "--density", "0.5"]) == 0
    assert main(["embed", "--input", str(train), "--output", str(emb), "--k", "2", "--p", "1"] + dims(10, 5)) == 0
    argv = ["train", "--input", str(train), "--embedding", str(emb), "--output", str(model),
            "--decoder", "logistic", "--epochs", "2"]
    assert main(argv + dims(10, 5)) == 0
    assert model.exists()


@pytest.mark.parametrize("decoder, metric", [("inner-product", "median_acc"), ("logistic", "median_p@1")])
def test_compare_table(capsys, decoder, metric):
    argv = ["compare", "--n", "150", "--d", "10", "--c", "6", "--rank", "2", "--labels-per-example", "2",
            "--k", "2", "--p", "2", "--seeds", "2", "--epochs", "2", "--decoder", decoder]
    assert main(argv) == 0
    header, *rows = capsys.readouterr().out.strip().splitlines()
    assert header.split()[:2] == ["method", metric]
    names = [row.split()[0] for row in rows]
    assert names == (["re", "cs", "pca", "random"] if decoder == "inner-product" else ["re", "cs", "random"])


class TestErrorExitCodes:
    def diagnostic(self, capsys) -> str:
        return capsys.readouterr().err.strip().splitlines()[-1]

    def test_missing_required_path(self, capsys):
        assert main(["embed", "--input", "whatever.svm"]) == 2
        assert self.diagnostic(capsys).startswith("error category=validation code=2 message=")

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.svm"
        bad.write_text("1:x\n")
        assert main(["embed", "--input", str(bad), "--output", str(tmp_path / "o")]) == 7
        line = self.diagnostic(capsys)
        assert line.startswith("error category=parse code=7 message=")
        assert "line 1" in json.loads(line.split("message=", 1)[1])

    def test_missing_input(self, tmp_path, capsys):
        assert main(["embed", "--input", str(tmp_path / "absent.svm"), "--output", str(tmp_path / "o")]) == 10
        assert "category=io" in self.diagnostic(capsys)

    def test_rank_error(self, tmp_path, gapped_file, capsys):
        assert main(["embed", "--input", str(gapped_file), "--output", str(tmp_path / "o"), "--k", "10"]) == 5
        assert "category=rank" in self.diagnostic(capsys)

    def test_bad_embedding_file(self, tmp_path, gapped_file, capsys):
        emb = tmp_path / "emb.rembed"
        emb.write_text("NOT AN EMBEDDING\n")
        argv = ["train", "--input", str(gapped_file), "--embedding", str(emb), "--output", str(tmp_path / "m.npz")]
        assert main(argv) == 8
        assert "category=format" in self.diagnostic(capsys)

    def test_index_out_of_range(self, tmp_path, capsys):
        data = tmp_path / "data.svm"
        data.write_text("0 1:1\n4 1:1\n")
        assert main(["embed", "--input", str(data), "--output", str(tmp_path / "o"), "--k", "1", "--classes", "3"]) == 9
        assert "category=index" in self.diagnostic(capsys)

    def test_unexpected_failure_is_one_line(self, tmp_path, gapped_file, capsys, monkeypatch):
        def fail(config):
            raise np.linalg.LinAlgError("SVD did not converge")

        monkeypatch.setitem(HANDLERS, Command.EMBED, fail)
        assert main(["embed", "--input", str(gapped_file), "--output", str(tmp_path / "o")]) == 1
        err = capsys.readouterr().err
        assert "Traceback" not in err
        line = err.strip().splitlines()[-1]
        assert line.startswith("error category=internal code=1 message=")
        assert "LinAlgError: SVD did not converge" in json.loads(line.split("message=", 1)[1])
