import numpy as np
import pytest

from wordctc.cli import main

TINY_SYNTH = [
    "--vocab-size", "8", "--n-phonemes", "6", "--feature-dim", "4",
    "--n-train", "14", "--n-dev", "4", "--n-test", "4",
    "--min-words", "2", "--max-words", "3",
    "--phoneme-duration-mean", "5", "--phoneme-duration-std", "2",
]

TINY_TRAIN = [
    "--mode", "word-ctc", "--downsample", "2", "--layers", "2", "--hidden", "10",
    "--phase1-epochs", "2", "--phase2-epochs", "1", "--seed", "5",
]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert run("synth", "--out-dir", root, "--seed", "3", *TINY_SYNTH) == 0
    return root


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory, data_dir):
    root = tmp_path_factory.mktemp("model")
    assert run("train", "--data", data_dir, "--out-dir", root, *TINY_TRAIN) == 0
    return root


class TestSynth:
    def test_outputs_exist(self, data_dir):
        assert (data_dir / "lexicon.tsv").exists()
        for split in ("train", "dev", "test"):
            assert (data_dir / split / "corpus.tsv").exists()
            assert (data_dir / split / "align.tsv").exists()
            assert list((data_dir / split / "feats").glob("*.feat"))
        assert (data_dir / "synth.config").exists()

    def test_reproducible(self, tmp_path, data_dir):
        again = tmp_path / "again"
        assert run("synth", "--out-dir", again, "--seed", "3", *TINY_SYNTH) == 0
        for rel in ("lexicon.tsv", "train/corpus.tsv", "train/align.tsv"):
            assert (again / rel).read_bytes() == (data_dir / rel).read_bytes()
        a = sorted((again / "train" / "feats").glob("*.feat"))
        b = sorted((data_dir / "train" / "feats").glob("*.feat"))
        assert [f.name for f in a] == [f.name for f in b]
        assert all(x.read_bytes() == y.read_bytes() for x, y in zip(a, b))

    def test_bad_config_value(self, tmp_path):
        assert run("synth", "--out-dir", tmp_path / "x", "--vocab-size", "0") == 4


class TestTrain:
    def test_outputs(self, model_dir):
        assert (model_dir / "model.net").exists()
        log = (model_dir / "trainlog.tsv").read_text().strip().split("\n")
        assert len(log) == 3
        fields = log[0].split("\t")
        assert len(fields) == 7
        assert fields[0] == "1" and fields[1] == "1"

    def test_deterministic_rerun(self, tmp_path, data_dir, model_dir):
        again = tmp_path / "again"
        assert run("train", "--data", data_dir, "--out-dir", again, *TINY_TRAIN) == 0
        assert (again / "model.net").read_bytes() == (model_dir / "model.net").read_bytes()
        assert (again / "trainlog.tsv").read_bytes() == (model_dir / "trainlog.tsv").read_bytes()

    def test_config_file_and_flag_precedence(self, tmp_path, data_dir):
        cfg = tmp_path / "train.cfg"
        cfg.write_text(
            "mode = word-ctc\ndownsample = 2\nlayers = 2\nhidden = 10\n"
            "phase1-epochs = 9\nphase2-epochs = 0\nseed = 5\n"
        )
        out = tmp_path / "out"
        assert (
            run("train", "--config", cfg, "--data", data_dir, "--out-dir", out,
                "--phase1-epochs", "1") == 0
        )
        log = (out / "trainlog.tsv").read_text().strip().split("\n")
        assert len(log) == 1  # the flag beat the config file's 9

    def test_unknown_config_key(self, tmp_path, data_dir):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no-such-option = 1\n")
        assert run("train", "--config", cfg, "--data", data_dir,
                   "--out-dir", tmp_path / "o") == 4

    def test_missing_data_dir(self, tmp_path):
        assert run("train", "--data", tmp_path / "nope", "--out-dir", tmp_path / "o",
                   *TINY_TRAIN) == 4

    def test_failure_leaves_no_outputs(self, tmp_path, data_dir):
        out = tmp_path / "out"
        code = run("train", "--data", data_dir, "--out-dir", out,
                   "--mode", "word-ctc", "--downsample", "3")
        assert code == 4
        assert not list(out.iterdir())

    def test_data_fraction(self, tmp_path, data_dir):
        out = tmp_path / "half"
        assert run("train", "--data", data_dir, "--out-dir", out,
                   "--data-fraction", "0.5", *TINY_TRAIN) == 0

    def test_phoneme_mode(self, tmp_path, data_dir):
        out = tmp_path / "phone"
        assert run("train", "--data", data_dir, "--out-dir", out,
                   "--mode", "phoneme-ctc", "--downsample", "2", "--layers", "2",
                   "--hidden", "8", "--phase1-epochs", "1", "--phase2-epochs", "0",
                   "--seed", "2") == 0

    def test_frame_classifier_mode(self, tmp_path, data_dir):
        out = tmp_path / "frames"
        assert run("train", "--data", data_dir, "--out-dir", out,
                   "--mode", "frame-classifier", "--downsample", "1", "--layers", "2",
                   "--hidden", "8", "--phase1-epochs", "1", "--phase2-epochs", "0",
                   "--seed", "2") == 0

    def test_transfer_init(self, tmp_path, data_dir):
        phone = tmp_path / "phone"
        assert run("train", "--data", data_dir, "--out-dir", phone,
                   "--mode", "phoneme-ctc", "--downsample", "1", "--layers", "3",
                   "--hidden", "10", "--phase1-epochs", "1", "--phase2-epochs", "0",
                   "--seed", "2") == 0
        warm = tmp_path / "warm"
        assert run("train", "--data", data_dir, "--out-dir", warm,
                   "--mode", "word-ctc", "--downsample", "1", "--layers", "4",
                   "--hidden", "10", "--phase1-epochs", "1", "--phase2-epochs", "0",
                   "--init-from", phone / "model.net", "--init-layers", "3",
                   "--seed", "2") == 0
        # the bottom three layers really came over
        from wordctc.network import load_network

        src = load_network(phone / "model.net")
        # a fresh run without transfer differs in the bottom layers
        cold = tmp_path / "cold"
        assert run("train", "--data", data_dir, "--out-dir", cold,
                   "--mode", "word-ctc", "--downsample", "1", "--layers", "4",
                   "--hidden", "10", "--phase1-epochs", "1", "--phase2-epochs", "0",
                   "--seed", "2") == 0
        warm_net = load_network(warm / "model.net")
        cold_net = load_network(cold / "model.net")
        assert not np.array_equal(warm_net.layers[0].w_i, cold_net.layers[0].w_i)


class TestDecodeAndScore:
    def test_decode_score_round_trip(self, tmp_path, data_dir, model_dir):
        dec = tmp_path / "dec"
        assert run("decode", "--model", model_dir / "model.net",
                   "--data", data_dir / "dev", "--out-dir", dec) == 0
        hyp = dec / "hypotheses.tsv"
        assert hyp.exists()
        lines = hyp.read_text().strip().split("\n")
        assert len(lines) == 4
        score = tmp_path / "score"
        assert run("score", "--ref", data_dir / "dev" / "corpus.tsv",
                   "--hyp", hyp, "--out-dir", score) == 0
        report = (score / "report.tsv").read_text().strip().split("\n")
        assert report[0].startswith("id\t")
        assert report[-1].startswith("ALL\t")

    def test_decode_reproducible(self, tmp_path, data_dir, model_dir):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert run("decode", "--model", model_dir / "model.net",
                       "--data", data_dir / "dev", "--out-dir", out) == 0
        assert (a / "hypotheses.tsv").read_bytes() == (b / "hypotheses.tsv").read_bytes()

    def test_score_fer(self, tmp_path, data_dir):
        # score alignments against themselves: 0 FER
        align = (data_dir / "dev" / "align.tsv")
        out = tmp_path / "fer"
        assert run("score", "--ref", align, "--hyp", align, "--out-dir", out,
                   "--fer") == 0
        assert (out / "report.tsv").read_text().strip().split("\n")[-1].endswith("0.0000")

    def test_score_missing_reference(self, tmp_path, data_dir):
        hyp = tmp_path / "hyp.tsv"
        hyp.write_text("ghost\tw00\n")
        assert run("score", "--ref", data_dir / "dev" / "corpus.tsv",
                   "--hyp", hyp, "--out-dir", tmp_path / "s") == 3

    def test_corrupt_feature_file(self, tmp_path, data_dir, model_dir):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(data_dir / "dev", broken)
        feat = sorted((broken / "feats").glob("*.feat"))[0]
        feat.write_bytes(feat.read_bytes()[:10])
        assert run("decode", "--model", model_dir / "model.net",
                   "--data", broken, "--out-dir", tmp_path / "d") == 3


class TestAnalyze:
    def test_analyze_small_model(self, tmp_path, data_dir, model_dir):
        # 8 words is too few for the 48-50 neighbor band, so restrict to
        # the blank and margin reports
        out = tmp_path / "ana"
        assert run("analyze", "--model", model_dir / "model.net",
                   "--lexicon", data_dir / "lexicon.tsv", "--out-dir", out,
                   "--margin", "--transcripts", data_dir / "train" / "corpus.tsv") == 0
        table = (out / "margin_table.tsv").read_text().strip().split("\n")
        assert table[0] == "word\tcount\tmargin"
        assert len(table) == 9
        summary = (out / "summary.tsv").read_text()
        assert "frequency_margin_spearman" in summary

    def test_overlap_needs_enough_words(self, tmp_path, data_dir, model_dir):
        out = tmp_path / "ana2"
        assert run("analyze", "--model", model_dir / "model.net",
                   "--lexicon", data_dir / "lexicon.tsv", "--out-dir", out,
                   "--overlap") == 4
        assert not list(out.iterdir())


class TestPipelineDeterminism:
    def test_two_full_runs_identical(self, tmp_path):
        outputs = []
        for name in ("one", "two"):
            base = tmp_path / name
            assert run("synth", "--out-dir", base / "data", "--seed", "11", *TINY_SYNTH) == 0
            assert run("train", "--data", base / "data", "--out-dir", base / "model",
                       *TINY_TRAIN) == 0
            assert run("decode", "--model", base / "model" / "model.net",
                       "--data", base / "data" / "test", "--out-dir", base / "dec") == 0
            outputs.append(base)
        one, two = outputs
        for rel in ("data/lexicon.tsv", "model/model.net", "model/trainlog.tsv",
                    "dec/hypotheses.tsv"):
            assert (one / rel).read_bytes() == (two / rel).read_bytes(), rel
