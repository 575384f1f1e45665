import csv
from pathlib import Path

import numpy as np
import pytest

from vibroplots.cli import main
from vibroplots.render import FigureSpec, RenderError, load_columns, render, render_to_file

CANONICAL = Path(__file__).resolve().parents[2] / "data" / "canonical"

BETA_COLUMNS = ["beta", "e_tau", "c_min_sq", "c_ab", "c_ac", "c_bc", "fidelity_plus", "fidelity_minus"]


def write_beta_csv(path, n=60):
    beta = np.linspace(0, 6, n)
    rows = np.column_stack(
        [
            beta,
            4 / 3 * np.exp(-((beta - 1) ** 2)),
            4 / 9 * np.exp(-((beta - 1) ** 2)),
            0.5 * np.abs(np.sin(beta)),
            0.5 * np.abs(np.sin(beta + 0.3)),
            0.8 * np.abs(np.sin(beta / 2)),
            np.abs(np.cos(beta)) ** 2,
            np.abs(np.sin(beta)) ** 2,
        ]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BETA_COLUMNS)
        writer.writerows(rows.tolist())
    return path


def write_fig2_csv(path, nd=12, ne=15):
    delta = np.linspace(0, 0.4, nd)
    eps = np.linspace(-0.5, 1.5, ne)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["delta", "epsilon", "A"])
        for d in delta:
            for e in eps:
                writer.writerow([d, e, 1.0 / (1.0 + (e - d) ** 2)])
    return path


def write_fig5_csv(path, n=40):
    beta = np.linspace(0, 6, n)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["beta", "fidelity_plus", "fidelity_minus"])
        writer.writerows(np.column_stack([beta, np.cos(beta) ** 2, np.sin(beta) ** 2]).tolist())
    return path


def reference_values(fig):
    values = set()
    for ax in fig.axes:
        for line in ax.get_lines():
            ydata = np.asarray(line.get_ydata(), dtype=float)
            if ydata.size and np.all(ydata == ydata[0]):
                values.add(round(float(ydata[0]), 6))
    return values


def test_render_fig3_with_reference_lines(tmp_path):
    data = write_beta_csv(tmp_path / "d.csv")
    fig = render(FigureSpec(3, (str(data),), str(tmp_path / "out.png")))
    refs = reference_values(fig)
    assert round(4 / 3, 6) in refs
    assert round(4 / 9, 6) in refs


def test_render_to_file_writes_png(tmp_path):
    data = write_beta_csv(tmp_path / "d.csv")
    out = render_to_file(FigureSpec(4, (str(data),), str(tmp_path / "fig4.png")))
    assert out.exists() and out.stat().st_size > 0


def test_render_fig2_heatmap(tmp_path):
    data = write_fig2_csv(tmp_path / "grid.csv")
    out = render_to_file(FigureSpec(2, (str(data),), str(tmp_path / "fig2.png")))
    assert out.exists() and out.stat().st_size > 0


def test_render_fig5(tmp_path):
    data = write_fig5_csv(tmp_path / "f.csv")
    out = render_to_file(FigureSpec(5, (str(data),), str(tmp_path / "fig5.png")))
    assert out.exists()


def test_beta_window_override_does_not_touch_data(tmp_path):
    data = write_beta_csv(tmp_path / "d.csv")
    before = Path(data).read_bytes()
    fig = render(FigureSpec(3, (str(data),), str(tmp_path / "o.png"), beta_min=1.0, beta_max=2.0))
    assert Path(data).read_bytes() == before
    assert fig.axes[0].get_xlim() == (1.0, 2.0)


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(RenderError):
        load_columns(empty, ("beta",))
    header_only = tmp_path / "h.csv"
    header_only.write_text("beta,e_tau\n")
    with pytest.raises(RenderError):
        load_columns(header_only, ("beta",))


def test_missing_columns_rejected(tmp_path):
    data = write_fig5_csv(tmp_path / "f.csv")
    with pytest.raises(RenderError):
        render(FigureSpec(3, (str(data),), str(tmp_path / "x.png")))


def test_cli_exit_codes(tmp_path, capsys):
    data = write_beta_csv(tmp_path / "d.csv")
    out = tmp_path / "fig3.png"
    assert main(["--fig", "3", "--data", str(data), "--out", str(out)]) == 0
    assert out.exists()
    capsys.readouterr()
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["--fig", "3", "--data", str(empty), "--out", str(tmp_path / "no.png")]) == 1


@pytest.mark.parametrize("fig_id,name", [(2, "fig2"), (3, "fig3"), (4, "fig4"), (5, "fig5")])
def test_shipped_canonical_csvs_render(tmp_path, fig_id, name):
    data = CANONICAL / name / "data.csv"
    assert data.exists(), f"canonical dataset {data} is missing"
    out = tmp_path / f"{name}.png"
    assert main(["--fig", str(fig_id), "--data", str(data), "--out", str(out)]) == 0
    assert out.exists() and out.stat().st_size > 0
    if fig_id in (3, 4):
        fig = render(FigureSpec(fig_id, (str(data),), str(out)))
        refs = reference_values(fig)
        assert round(4 / 3, 6) in refs and round(4 / 9, 6) in refs
