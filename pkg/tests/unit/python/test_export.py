#!/usr/bin/env python3
"""
Unit tests for sphere_pcurv/export.py - CSV and JSON artifact helpers
"""

import json
import math
import sys

import pytest

sys.path.insert(0, '.')
from sphere_pcurv.export import (
    csv_text,
    format_cell,
    json_text,
    parse_csv_text,
    parse_float,
    read_csv,
    read_json,
    write_csv,
    write_json,
)


class TestFormatCell:
    """Tests for format_cell."""

    def test_none_is_empty(self):
        assert format_cell(None) == ""

    def test_bools(self):
        assert format_cell(True) == "true"
        assert format_cell(False) == "false"

    def test_int(self):
        assert format_cell(42) == "42"

    def test_float_has_17_digits(self):
        assert format_cell(0.1) == "0.10000000000000001"
        assert float(format_cell(math.pi)) == math.pi

    def test_whole_float(self):
        assert format_cell(2.0) == "2"

    def test_non_finite(self):
        assert format_cell(float("nan")) == "nan"
        assert format_cell(float("inf")) == "inf"
        assert format_cell(float("-inf")) == "-inf"

    def test_string_passthrough(self):
        assert format_cell("parallel:phi=1") == "parallel:phi=1"


class TestParseFloat:
    """Tests for parse_float."""

    def test_empty_is_none(self):
        assert parse_float("  ") is None

    def test_number(self):
        assert parse_float(format_cell(1.0 / 3.0)) == 1.0 / 3.0

    def test_nan(self):
        assert math.isnan(parse_float("nan"))


class TestCsvText:
    """Tests for csv_text and parse_csv_text."""

    def test_crlf_and_header(self):
        text = csv_text(["a", "b"], [[1, 0.5]])
        assert text == "a,b\r\n1,0.5\r\n"

    def test_meta_lines_sorted(self):
        text = csv_text(["a"], [[1]], meta={"z": 1, "b": "x"})
        assert text.startswith("# b=x\r\n# z=1\r\n")

    def test_quotes_commas(self):
        text = csv_text(["curve"], [["parallel:phi=1,turns=2"]])
        assert '"parallel:phi=1,turns=2"' in text

    def test_parse_meta_header_rows(self):
        meta, header, rows = parse_csv_text(csv_text(["a", "b"], [[1, 2.5], [3, None]], meta={"k": "v"}))
        assert meta == {"k": "v"}
        assert header == ["a", "b"]
        assert rows == [["1", "2.5"], ["3", ""]]

    def test_parse_empty(self):
        assert parse_csv_text("") == ({}, [], [])

    def test_parse_plain_newlines(self):
        _, header, rows = parse_csv_text("t,x\n0,1\n\n1,2\n")
        assert header == ["t", "x"]
        assert rows == [["0", "1"], ["1", "2"]]


class TestFiles:
    """Tests for the file writers and readers."""

    def test_write_read_csv(self, tmp_path):
        path = write_csv(tmp_path / "sub" / "t.csv", ["x"], [[0.25]], meta={"n": 1})
        assert path.read_bytes() == b"# n=1\r\nx\r\n0.25\r\n"
        assert read_csv(path) == ({"n": "1"}, ["x"], [["0.25"]])

    def test_json_text_sorted(self):
        assert json_text({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'

    def test_write_read_json(self, tmp_path):
        path = write_json(tmp_path / "out" / "r.json", {"kind": "blowup", "p": 2.0})
        assert read_json(path) == {"kind": "blowup", "p": 2.0}
        assert json.loads(path.read_text())["kind"] == "blowup"
