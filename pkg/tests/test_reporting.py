import numpy as np
import pytest

from src.kronml.errors import ReportError
from src.kronml.evaluation import EvalReport, metrics_from_confusion
from src.kronml.reporting import accuracy_table, load_report, plot_confusion, render_report, write_report_set


@pytest.fixture
def report():
    matrix = np.array([[90, 10], [5, 95]])
    return EvalReport(n=12, classifier='lgbm', encoding=1,
                      sizes={'train0': 233, 'train1': 233, 'valid0': 100, 'valid1': 100},
                      confusion=matrix.tolist(), auc=0.97, **metrics_from_confusion(matrix))


def test_accuracy_table_layout():
    text = accuracy_table({12: {'nearn': 0.91, 'lgbm': 0.97}, 99: {'cnn2': 0.5}}, reference=True)
    lines = text.splitlines()
    assert lines[0].split() == ['n', '#D_n', '(per', 'class)', 'NearN', 'CNN2', 'CNN3', 'LGBM']
    assert lines[2].split() == ['12', '126,900', '0.9100', '-', '-', '0.9700']
    assert lines[3].split() == ['(reference)', '0.9155', '0.9529', '0.9697', '0.9714']
    assert lines[4].split() == ['99', '-', '-', '0.5000', '-', '-']


def test_json_report_round_trip(tmp_path, report):
    path = render_report(report, 'json', tmp_path / "lgbm_n12.json")
    assert load_report(path) == report


def test_text_report(tmp_path, report):
    path = render_report(report, 'text', tmp_path / "lgbm_n12.txt")
    text = path.read_text()
    assert "0.9250" in text
    assert "AUC: 0.9700" in text


@pytest.mark.parametrize("suffix", ["png", "svg"])
def test_figure_report(tmp_path, report, suffix):
    path = plot_confusion(report, tmp_path / f"confusion.{suffix}")
    assert path.stat().st_size > 0


def test_report_set(tmp_path, report):
    paths = write_report_set(report, tmp_path / "reports", "lgbm_n12")
    assert [p.name for p in paths] == ["lgbm_n12.json", "lgbm_n12.txt", "lgbm_n12.png"]
    assert all(p.is_file() for p in paths)


def test_report_errors(tmp_path, report):
    with pytest.raises(ReportError):
        render_report(report, 'html', tmp_path / "x.html")
    with pytest.raises(ReportError):
        plot_confusion(report, tmp_path / "confusion.bmp")
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(ReportError):
        render_report(report, 'text', blocker / "report.txt")
    with pytest.raises(ReportError):
        load_report(tmp_path / "missing.json")
