import hashlib
import os

import pytest

from scalenet_figures import PlotSpec, RenderError, render
from scalenet_figures.cli import main


def _hash_tree(root):
    out = {}
    for dirpath, _, names in os.walk(root):
        for name in names:
            p = os.path.join(dirpath, name)
            out[p] = hashlib.sha256(open(p, "rb").read()).hexdigest()
    return out


class TestFormation:
    def test_renders_with_highlight(self, exports, tmp_path):
        out = tmp_path / "formation.png"
        render(PlotSpec(kind="formation",
                        inputs=[str(exports["robot"] / "trace.csv"),
                                str(exports["robot"] / "metrics.json")],
                        out=str(out)))
        assert out.exists()
        extract = (tmp_path / "formation.png.data.csv").read_text().splitlines()
        assert extract[0] == "agent_id,x_final,y_final"
        assert len(extract) == 1 + 12  # two circles hold 4 + 8 robots

    def test_empty_trace_writes_nothing(self, tmp_path):
        trace = tmp_path / "trace.csv"
        trace.write_text("time,agent_id,x0,x1,x2,x3,y0,y1\n")
        out = tmp_path / "fig.png"
        with pytest.raises(RenderError, match="no data rows"):
            render(PlotSpec(kind="formation", inputs=[str(trace)], out=str(out)))
        assert not out.exists()
        assert not (tmp_path / "fig.png.data.csv").exists()

    def test_schema_mismatch_names_column(self, tmp_path):
        trace = tmp_path / "trace.csv"
        trace.write_text("time,agent_id,x0\n0.0,0,1.0\n")
        with pytest.raises(RenderError, match="column 'y0'"):
            render(PlotSpec(kind="formation", inputs=[str(trace)],
                            out=str(tmp_path / "fig.png")))


class TestSweepPlots:
    def test_circle_bars(self, exports, tmp_path):
        out = tmp_path / "bars.png"
        render(PlotSpec(kind="circle_bars",
                        inputs=[str(exports["circles"] / "sweep.csv")],
                        out=str(out)))
        lines = (tmp_path / "bars.png.data.csv").read_text().splitlines()
        assert lines[0] == "group,max_deviation"
        assert len(lines) == 3

    def test_delay_sweep(self, exports, tmp_path):
        out = tmp_path / "delay.png"
        render(PlotSpec(kind="delay_sweep",
                        inputs=[str(exports["taus"] / "sweep.csv")],
                        out=str(out)))
        lines = (tmp_path / "delay.png.data.csv").read_text().splitlines()
        assert lines[0] == "value,max_deviation,envelope_bound"
        assert len(lines) == 4

    def test_missing_group_columns(self, tmp_path):
        sweep = tmp_path / "sweep.csv"
        sweep.write_text("axis,value,certified,lambda_hat,envelope_bound,"
                         "max_deviation,diverged_at\ntau0,0.1,1,0.1,1,0.5,\n")
        with pytest.raises(RenderError, match="group_1"):
            render(PlotSpec(kind="circle_bars", inputs=[str(sweep)],
                            out=str(tmp_path / "f.png")))


class TestTimeSeries:
    @pytest.mark.parametrize("kind", ["deviation_ts", "neuron_ts"])
    def test_renders_with_envelope(self, exports, tmp_path, kind):
        src = exports["hopfield" if kind == "neuron_ts" else "robot"]
        out = tmp_path / f"{kind}.png"
        render(PlotSpec(kind=kind, inputs=[str(src / "metrics.json"),
                                           str(src / "certificate.json")],
                        out=str(out)))
        lines = (tmp_path / f"{kind}.png.data.csv").read_text().splitlines()
        assert lines[0].startswith("time,agent_0")
        assert lines[0].endswith(",envelope")

    def test_missing_series_reported(self, tmp_path):
        bad = tmp_path / "metrics.json"
        bad.write_text('{"max_deviation": 1.0}')
        with pytest.raises(RenderError, match="deviation_series"):
            render(PlotSpec(kind="neuron_ts", inputs=[str(bad)],
                            out=str(tmp_path / "f.png")))


class TestContract:
    def test_inputs_never_mutated(self, exports, tmp_path):
        before = _hash_tree(exports["robot"])
        render(PlotSpec(kind="formation",
                        inputs=[str(exports["robot"] / "trace.csv")],
                        out=str(tmp_path / "f.png")))
        assert _hash_tree(exports["robot"]) == before

    def test_extract_byte_stable(self, exports, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.png"
            render(PlotSpec(kind="delay_sweep",
                            inputs=[str(exports["taus"] / "sweep.csv")],
                            out=str(out)))
            blobs.append((tmp_path / f"{name}.png.data.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(RenderError, match="unknown plot kind"):
            PlotSpec(kind="sparkline", inputs=["x.csv"], out="f.png")

    def test_missing_input_rejected(self):
        with pytest.raises(RenderError, match="not found"):
            PlotSpec(kind="formation", inputs=["/nonexistent/trace.csv"],
                     out="f.png")

    def test_cli_roundtrip(self, exports, tmp_path):
        out = tmp_path / "cli.png"
        rc = main(["--kind", "formation", "--in",
                   str(exports["robot"] / "trace.csv"), "--out", str(out)])
        assert rc == 0 and out.exists()

    def test_cli_reports_errors(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        trace.write_text("time,agent_id,x0,y0\n")
        rc = main(["--kind", "formation", "--in", str(trace), "--out",
                   str(tmp_path / "f.png")])
        assert rc == 1
        assert "no data rows" in capsys.readouterr().err
