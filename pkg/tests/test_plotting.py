import pytest

from dnnstate import plotting
from dnnstate.errors import FormatError


def write(path, text):
    path.write_text(text)
    return path


def test_loss_csv_one_polyline_per_file(tmp_path):
    a = write(tmp_path / "loss-global.csv", "step,loss,block_index,wall_ms\n100,1.0,0,\n200,0.1,0,\n")
    b = write(tmp_path / "loss-expansion.csv", "step,loss,block_index,wall_ms\n100,2.0,1,\n200,0.01,2,\n")
    out = plotting.plot_files([a, b], tmp_path / "p.svg", "loss")
    svg = out.read_text()
    assert svg.count("<polyline") == 2
    assert "loss-global" in svg and "loss-expansion" in svg
    assert svg.startswith('<svg xmlns="http://www.w3.org/2000/svg" width="640" height="420"')


def test_compare_csv_series_per_method(tmp_path):
    c = write(tmp_path / "compare.csv",
              "method,m,n,mu,max_h1,mean_h1\npod-pbdw,10,4,1.5,0.02,0.01\npod-pbdw,20,6,1.8,0.01,0.005\n"
              "resnet-expansion,10,9,nan,0.03,0.01\nresnet-expansion,20,9,nan,0.01,0.004\n")
    series = plotting.read_series(c)
    assert [s[0] for s in series] == ["pod-pbdw", "resnet-expansion"]
    assert series[0][1] == [10.0, 20.0]


def test_identical_input_gives_identical_bytes(tmp_path):
    a = write(tmp_path / "l.csv", "step,loss,block_index,wall_ms\n100,0.5,1,\n200,0.25,1,\n300,0.2,1,\n")
    plotting.plot_files([a], tmp_path / "1.svg")
    plotting.plot_files([a], tmp_path / "2.svg")
    assert (tmp_path / "1.svg").read_bytes() == (tmp_path / "2.svg").read_bytes()


@pytest.mark.parametrize("text", ["", "step,loss,block_index,wall_ms\n", "a,b\n1,2\n",
                                  "step,loss,block_index,wall_ms\n100,abc,1,\n"])
def test_malformed_csv_rejected(tmp_path, text):
    with pytest.raises(FormatError):
        plotting.read_series(write(tmp_path / "x.csv", text))


def test_nonpositive_losses_only_is_an_error():
    with pytest.raises(FormatError):
        plotting.svg_chart([("a", [1, 2], [0.0, -1.0])])
