import csv
import io
import json

import pytest
from oracles import brute_rank

from profitrec.cli import main
from profitrec.domain import build_customer_profiles
from profitrec.evaluation import time_split
from profitrec.io import read_dataset
from profitrec.mf_baseline import TrainConfig, init_model, load_model


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--customers", "150", "--items", "60", "--seed", "2", "--out", str(root / "data")]) == 0
    return root


def data_args(root):
    return ["--interactions", str(root / "data" / "interactions.csv"), "--catalog", str(root / "data" / "catalog.csv")]


@pytest.fixture(scope="module")
def trained(workdir):
    model = workdir / "model.bin"
    assert main(["train", *data_args(workdir), "--model", str(model), "--epochs", "5",
                 "--latent-dim", "8", "--seed", "4"]) == 0
    return model


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_clean(workdir, capsys):
    code, out, _ = run(capsys, ["validate", *data_args(workdir)])
    assert code == 0 and out == ""


def test_validate_bad_price(tmp_path, capsys):
    (tmp_path / "c.csv").write_text("item_id,retail_price,price\nok,10,5\nbroken,10,-1\n")
    (tmp_path / "i.csv").write_text("customer_id,item_id,action,timestamp\na,ok,view,1\n")
    code, out, _ = run(capsys, ["validate", "--interactions", str(tmp_path / "i.csv"),
                                "--catalog", str(tmp_path / "c.csv")])
    assert code == 1
    assert "broken" in out and len(out.splitlines()) == 1


def test_validate_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, ["validate", "--interactions", str(tmp_path / "nope.csv"),
                                "--catalog", str(tmp_path / "nope2.csv")])
    assert code == 2 and "nope" in err


def test_validate_garbled_cites_line(tmp_path, capsys):
    (tmp_path / "c.csv").write_text("item_id,retail_price,price\nok,10,5\nbad,ten,5\n")
    (tmp_path / "i.csv").write_text("customer_id,item_id,action,timestamp\n")
    code, _, err = run(capsys, ["validate", "--interactions", str(tmp_path / "i.csv"),
                                "--catalog", str(tmp_path / "c.csv")])
    assert code == 2 and ":3:" in err


def test_generate_writes_stats_and_is_reproducible(workdir, tmp_path):
    assert main(["generate", "--customers", "150", "--items", "60", "--seed", "2", "--out", str(tmp_path)]) == 0
    for name in ("interactions.csv", "catalog.csv", "stats.json"):
        assert (tmp_path / name).read_bytes() == (workdir / "data" / name).read_bytes()
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["No. of unique customers"] == 150


def test_generate_zero_customers(tmp_path, capsys):
    code, _, err = run(capsys, ["generate", "--customers", "0", "--out", str(tmp_path)])
    assert code == 1 and "n_customers" in err


def test_generate_from_config_file(tmp_path):
    (tmp_path / "gen.cfg").write_text("preset = ds2\nn_customers = 40\nn_items = 30\n")
    assert main(["generate", "--gen-config", str(tmp_path / "gen.cfg"), "--out", str(tmp_path / "o")]) == 0
    stats = json.loads((tmp_path / "o" / "stats.json").read_text())
    assert stats["No. of unique products"] == 30


def test_train_manifest(trained):
    manifest = json.loads(trained.with_name("model.bin.manifest.json").read_text())
    assert manifest["seed"] == 4
    assert manifest["train_config"]["epochs"] == 5
    assert manifest["split"]["train_fraction"] == 0.8
    assert len(manifest["model_sha256"]) == 64


def test_train_rerun_identical(workdir, trained, tmp_path):
    again = tmp_path / "again.bin"
    assert main(["train", *data_args(workdir), "--model", str(again), "--epochs", "5",
                 "--latent-dim", "8", "--seed", "4"]) == 0
    assert again.read_bytes() == trained.read_bytes()


def test_train_zero_epochs_is_init(workdir, tmp_path):
    path = tmp_path / "m0.bin"
    assert main(["train", *data_args(workdir), "--model", str(path), "--epochs", "0", "--latent-dim", "3"]) == 0
    model = load_model(path)
    expected = init_model(len(model.customer_ids), len(model.item_ids), TrainConfig(latent_dim=3, seed=0))
    assert model.params.equals(expected)


def test_train_config_file_and_flag_precedence(workdir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"interactions = {workdir / 'data' / 'interactions.csv'}\n"
        f"catalog = {workdir / 'data' / 'catalog.csv'}\n"
        "epochs = 1\nlatent_dim = 2\nseed = 11\n"
    )
    path = tmp_path / "m.bin"
    assert main(["train", "--config", str(cfg), "--model", str(path), "--seed", "12"]) == 0
    manifest = json.loads((tmp_path / "m.bin.manifest.json").read_text())
    assert manifest["train_config"]["epochs"] == 1
    assert manifest["seed"] == 12


def test_config_unknown_key(workdir, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("flavour = mint\n")
    code, _, err = run(capsys, ["train", "--config", str(cfg), *data_args(workdir), "--model", str(tmp_path / "m")])
    assert code == 1 and "flavour" in err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_recommend_default_ten_rows(workdir, trained, capsys):
    code, out, _ = run(capsys, ["recommend", *data_args(workdir), "--model", str(trained), "--customer", "c000"])
    assert code == 0
    recs = rows(out)
    assert len(recs) == 10
    assert list(recs[0]) == ["customer_id", "rank", "item_id", "baseline_score", "multiplier", "final_score"]
    assert [r["rank"] for r in recs] == [str(n) for n in range(1, 11)]


def test_recommend_zero_hyper_matches_baseline_only(workdir, trained, capsys):
    args = ["recommend", *data_args(workdir), "--model", str(trained), "--customer", "c010", "--n", "25"]
    _, zero, _ = run(capsys, args + ["--alpha", "0", "--beta", "0"])
    _, base, _ = run(capsys, args + ["--baseline-only"])
    assert [r["item_id"] for r in rows(zero)] == [r["item_id"] for r in rows(base)]


def test_recommend_unknown_customer_warns(workdir, trained, capsys, caplog):
    code, out, _ = run(capsys, ["recommend", *data_args(workdir), "--model", str(trained), "--customer", "ghost"])
    assert code == 0 and "ghost" in caplog.text
    assert len(rows(out)) == 10


def test_recommend_matches_brute_force(workdir, trained, capsys):
    code, out, _ = run(capsys, ["recommend", *data_args(workdir), "--model", str(trained),
                                "--customer", "c003", "--alpha", "0.8", "--beta", "-0.6", "--n", "10"])
    d = read_dataset(workdir / "data" / "interactions.csv", workdir / "data" / "catalog.csv")
    train, _ = time_split(d)
    avg = build_customer_profiles(train).avg_price("c003")
    m = load_model(trained)
    u = m.customer_index("c003")
    p = m.params
    want = brute_rank(p.customer_factors[u].tolist(), p.item_factors.tolist(), float(p.customer_bias[u]),
                      p.item_bias.tolist(), m.item_ids, [d.catalog[i].retail_price for i in m.item_ids],
                      [d.catalog[i].price for i in m.item_ids], avg, set(m.seen_items("c003").tolist()),
                      (0.8, -0.6), 10)
    assert [r["item_id"] for r in rows(out)] == want


def test_recommend_rejects_out_of_range_alpha(workdir, trained, capsys):
    code, _, err = run(capsys, ["recommend", *data_args(workdir), "--model", str(trained),
                                "--customer", "c000", "--alpha", "1.5"])
    assert code == 1 and "alpha" in err


def test_evaluate_and_single_cell_sweep_agree(workdir, trained, tmp_path, capsys):
    code, out, _ = run(capsys, ["evaluate", *data_args(workdir), "--model", str(trained), "--baseline-only"])
    assert code == 0
    base = rows(out)[0]
    code, _, _ = run(capsys, ["sweep", *data_args(workdir), "--model", str(trained), "--alpha-range", "0,0",
                              "--beta-range", "0,0", "--out", str(tmp_path), "--workers", "1"])
    assert code == 0
    sweep = rows((tmp_path / "sweep.csv").read_text())
    assert sweep == [base]


def test_sweep_default_grid(workdir, trained, tmp_path, capsys):
    code, _, _ = run(capsys, ["sweep", *data_args(workdir), "--model", str(trained), "--out", str(tmp_path),
                              "--workers", "1"])
    assert code == 0
    assert len(rows((tmp_path / "sweep.csv").read_text())) == 441
    assert len(rows((tmp_path / "sweep_long.csv").read_text())) == 441 * 4
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert len(doc["rows"]) == 441
    assert doc["metadata"]["seed"] == 4
    assert len(doc["metadata"]["dataset_sha256"]) == 64


def test_bad_model_file(workdir, tmp_path, capsys):
    (tmp_path / "junk.bin").write_bytes(b"junk")
    code, _, err = run(capsys, ["evaluate", *data_args(workdir), "--model", str(tmp_path / "junk.bin")])
    assert code == 2


def test_usage_error_exit_code(capsys):
    assert main(["train"]) == 2
    capsys.readouterr()


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "profitrec", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sweep" in res.stdout
