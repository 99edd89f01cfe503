"""Subcommand behavior: outputs, exit codes, overrides, determinism."""

import csv
import subprocess
import sys

import pytest

from distancing.cli import main
from e2efixture import write_config, write_inputs


@pytest.fixture()
def fixture_config(tmp_path):
    return write_config(tmp_path / "in", tmp_path / "out"), tmp_path / "out"


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*"))}


def _body(path):
    lines = path.read_text().splitlines(keepends=True)
    return "".join(line for line in lines if not line.startswith("#"))


class TestIndex:
    def test_writes_expected_tables(self, fixture_config):
        config, out = fixture_config
        assert main(["index", "--config", str(config)]) == 0
        flags = {row["soc_code"]: row for row in read_csv(out / "occupation-index.csv")}
        assert flags["11-1011"]["teamwork"] == "1"
        assert flags["11-2021"]["teamwork"] == "0"  # email parity blocks
        assert flags["29-1141"]["communication"] == "1"
        assert flags["53-3032"]["presence"] == "1"
        index = {row["industry_code"]: row for row in read_csv(out / "industry-index.csv")}
        assert index["44"]["chi_communication"] == "0.6"
        assert index["31"]["chi_presence"] == "0.5"
        assert index["62"]["chi_teamwork"] == "0.5"
        locations = {row["zcta"]: row for row in read_csv(out / "location-index.csv")}
        assert len(locations) == 4
        assert float(locations["10004"]["share_presence"]) == pytest.approx(0.5)
        assert (out / "reconciliation.txt").exists()

    def test_provenance_comment_first_line(self, fixture_config):
        config, out = fixture_config
        main(["index", "--config", str(config)])
        first = (out / "industry-index.csv").read_text().splitlines()[0]
        assert first.startswith("# distancing 0.1.0 config:")

    def test_golden_index_contents(self, fixture_config):
        # frozen from a hand-checked run (provenance line excluded: its
        # hash covers the absolute input paths)
        config, out = fixture_config
        main(["index", "--config", str(config)])
        occupation_golden = (
            "soc_code,title,teamwork,customer,communication,presence\n"
            "11-1011,Team supervisor,1,0,1,0\n"
            "11-2021,Marketing manager,0,0,0,0\n"
            "29-1141,Registered nurse,1,1,1,0\n"
            "41-2031,Retail salesperson,0,1,1,0\n"
            "43-9061,Office clerk,0,0,0,0\n"
            "53-3032,Heavy truck driver,0,0,0,1\n"
        )
        industry_golden = (
            "industry_code,name,chi_teamwork,chi_customer,chi_communication,chi_presence\n"
            "31,31,0.0,0.0,0.0,0.5\n"
            "44,44,0.0,0.6,0.6,0.0\n"
            "62,62,0.5,0.25,0.5,0.0\n"
        )
        assert _body(out / "occupation-index.csv") == occupation_golden
        assert _body(out / "industry-index.csv") == industry_golden

    def test_rerun_byte_identical(self, fixture_config):
        config, out = fixture_config
        main(["index", "--config", str(config)])
        before = snapshot(out)
        main(["index", "--config", str(config)])
        assert snapshot(out) == before

    def test_employment_density_flag(self, fixture_config):
        config, out = fixture_config
        main(["index", "--config", str(config)])
        population_based = {r["zcta"]: float(r["density"])
                            for r in read_csv(out / "location-index.csv")}
        assert main(["index", "--config", str(config), "--employment-density"]) == 0
        rows = read_csv(out / "location-index.csv")
        employment_based = {r["zcta"]: float(r["density"]) for r in rows}
        assert employment_based != population_based
        mean = sum(float(r["density"]) * float(r["employment"]) for r in rows) / sum(
            float(r["employment"]) for r in rows
        )
        assert mean == pytest.approx(1.0, abs=1e-9)


class TestCalibrate:
    def test_report_fields(self, fixture_config):
        config, out = fixture_config
        assert main(["calibrate", "--config", str(config)]) == 0
        (row,) = read_csv(out / "calibration.csv")
        assert float(row["achieved_slope"]) == pytest.approx(0.04, abs=1e-9)
        assert float(row["achieved_share"]) == pytest.approx(0.5, rel=1e-8)
        assert row["eps_fixed"] == "0"
        assert (out / "calibration.txt").read_text().count("eps:") == 1

    def test_fixed_eps_honored(self, fixture_config):
        config, out = fixture_config
        assert main(["calibrate", "--config", str(config), "--fixed-eps", "0.02"]) == 0
        (row,) = read_csv(out / "calibration.csv")
        assert float(row["eps"]) == 0.02
        assert row["eps_fixed"] == "1"

    def test_bad_contact_share_is_usage_error(self, fixture_config):
        config, _ = fixture_config
        assert main(["calibrate", "--config", str(config), "--contact-share", "1.5"]) == 2


class TestSubsidy:
    def test_tables_written(self, fixture_config):
        config, out = fixture_config
        assert main(["subsidy", "--config", str(config)]) == 0
        sectors = read_csv(out / "sector-subsidy.csv")
        assert sectors[-1]["industry"] == "Average"
        assert [r["industry"] for r in sectors[:-1]] == ["44", "62", "31"]  # most affected first
        locations = read_csv(out / "location-subsidy.csv")
        assert {r["zcta"] for r in locations} == {"10001", "10002", "10003", "10004"}
        fig2 = read_csv(out / "fig2.csv")
        assert len(fig2) == 100
        assert set(fig2[0]) == {"density", "distancing_ratio", "telecom_ratio", "regime"}

    def test_rerun_and_thread_flag_byte_identical(self, fixture_config, tmp_path):
        config, out = fixture_config
        main(["subsidy", "--config", str(config)])
        first = snapshot(out)
        main(["subsidy", "--config", str(config)])
        assert snapshot(out) == first
        other = tmp_path / "out-threaded"
        main(["subsidy", "--config", str(config), "--output-dir", str(other), "--threads", "4"])
        assert snapshot(other) == first

    def test_region_grouping_table(self, fixture_config, tmp_path):
        config, out = fixture_config
        groups = tmp_path / "regions.csv"
        groups.write_text("zcta,region\n10001,metro\n10002,metro\n")
        assert main(["subsidy", "--config", str(config), "--region-groups", str(groups)]) == 0
        (row,) = read_csv(out / "region-subsidy.csv")
        assert row["region"] == "metro"
        locations = {r["zcta"]: r for r in read_csv(out / "location-subsidy.csv")}
        lo = min(float(locations[z]["wage_subsidy_pct"]) for z in ("10001", "10002"))
        hi = max(float(locations[z]["wage_subsidy_pct"]) for z in ("10001", "10002"))
        assert lo <= float(row["wage_subsidy_pct"]) <= hi

    def test_default_exclusions_drop_hospital_cells(self, tmp_path):
        paths = write_inputs(tmp_path / "in")
        cbp = tmp_path / "in" / "cbp.csv"
        cbp.write_text(cbp.read_text() + "10001,622110,20-49,5,0\n")
        out = tmp_path / "out"
        args = ["subsidy", "--output-dir", str(out)]
        for key, value in paths.items():
            if key != "exclusions":  # fall back to the built-in default list
                args += [f"--{key.replace('_', '-')}", value]
        assert main(args) == 0
        sectors = {r["industry"] for r in read_csv(out / "sector-subsidy.csv")}
        assert "62" in sectors  # other health cells survive
        locations = {r["zcta"]: r for r in read_csv(out / "location-subsidy.csv")}
        # the hospital cell's 172.5 jobs never enter the 10001 total
        assert float(locations["10001"]["employment"]) == pytest.approx(90.0)

    def test_telecom_flag_fills_column(self, fixture_config):
        config, out = fixture_config
        assert main(["subsidy", "--config", str(config), "--telecom-cost", "1.5"]) == 0
        fig2 = read_csv(out / "fig2.csv")
        assert any(row["telecom_ratio"] for row in fig2)


class TestFig2Command:
    def test_standalone_curves(self, tmp_path):
        out = tmp_path / "o"
        rc = main([
            "fig2", "--chi", "0.5", "--eps", "0.5", "--cap", "1.1", "--telecom", "0.5",
            "--dmin", "0.5", "--dmax", "200", "--points", "50",
            "--output-dir", str(out),
        ])
        assert rc == 0
        rows = read_csv(out / "fig2.csv")
        assert len(rows) == 50
        regimes = {row["regime"] for row in rows}
        assert {"unconstrained", "distanced", "telecom"} <= regimes
        flat = [r for r in rows if r["regime"] == "unconstrained"]
        assert all(float(r["distancing_ratio"]) == 1.0 for r in flat)

    def test_bad_grid_is_usage_error(self, tmp_path):
        rc = main(["fig2", "--chi", "0.5", "--eps", "0.5", "--cap", "1.0",
                   "--dmin", "5", "--dmax", "1", "--output-dir", str(tmp_path)])
        assert rc == 2


class TestLowessCommand:
    def test_smooths_location_index(self, tmp_path):
        source = tmp_path / "location-index.csv"
        lines = ["zcta,density,share_teamwork,share_customer,share_communication,"
                 "share_presence,employment"]
        for i in range(15):
            d = 0.25 * (i + 1)
            lines.append(f"z{i:02d},{d},0.1,{0.02 * i},{0.02 * i + 0.1},0.3,{10 + i}")
        source.write_text("\n".join(lines) + "\n")
        out = tmp_path / "out"
        rc = main(["lowess", "--input", str(source), "--output-dir", str(out),
                   "--bandwidth", "0.6"])
        assert rc == 0
        rows = read_csv(out / "location-lowess.csv")
        assert len(rows) == 100
        assert set(rows[0]) == {"log_density", "teamwork", "customer", "communication",
                                "presence"}
        # constant input column smooths to a constant curve
        assert all(float(r["teamwork"]) == pytest.approx(0.1) for r in rows)
        # every cell parses as a plain number (no stray scalar reprs)
        assert all(float(v) == float(v) for r in rows for v in r.values())

    def test_too_few_points_is_data_error(self, tmp_path):
        source = tmp_path / "location-index.csv"
        source.write_text(
            "zcta,density,share_teamwork,share_customer,share_communication,"
            "share_presence,employment\nz,1.0,0,0,0,0,5\n"
        )
        rc = main(["lowess", "--input", str(source), "--output-dir", str(tmp_path / "o")])
        assert rc == 1

    def test_bad_bandwidth_is_usage_error(self, tmp_path):
        source = tmp_path / "location-index.csv"
        source.write_text("zcta,density,share_teamwork,share_customer,share_communication,"
                          "share_presence,employment\n")
        rc = main(["lowess", "--input", str(source), "--bandwidth", "0",
                   "--output-dir", str(tmp_path / "o")])
        assert rc == 2


class TestErrorContract:
    def test_missing_input_file_exit_2_with_path(self, tmp_path, capsys):
        rc = main(["index", "--occupations", str(tmp_path / "nope.csv"),
                   "--matrix", str(tmp_path / "also-nope.csv")])
        assert rc == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_unset_required_inputs_exit_2(self, tmp_path):
        assert main(["index", "--output-dir", str(tmp_path)]) == 2

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["--help"])
        assert excinfo.value.code == 0

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["index", "--frobnicate"])
        assert excinfo.value.code == 2

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "distancing", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "distancing 0.1.0" in proc.stdout
