"""Scenario files, flat config files and CSV output."""
from __future__ import annotations

import configparser
import csv
import io
import json
from pathlib import Path

import numpy as np

from .cellnet import InvalidConfigError, Scenario

SCENARIO_FORMAT_VERSION = 1
GAINS_LAYOUT = "gains[j][m][n] = power gain from BS j to the user served by BS m on subcarrier n"


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format_version": SCENARIO_FORMAT_VERSION,
        "n_cells": sc.n_cells,
        "n_subcarriers": sc.n_subcarriers,
        "seed": sc.seed,
        "sigma2_w": sc.sigma2,
        "p_max_w": sc.p_max,
        "bandwidth_hz": sc.bandwidth_hz,
        "isd_m": sc.isd_m,
        "gains_layout": GAINS_LAYOUT,
        "bs_positions_m": sc.bs_positions.tolist(),
        "user_positions_m": sc.user_positions.tolist(),
        "gains": sc.gains.tolist(),
    }


def scenario_from_dict(d: dict) -> Scenario:
    version = d.get("format_version")
    if version != SCENARIO_FORMAT_VERSION:
        raise InvalidConfigError(f"unsupported scenario format_version {version!r}")
    try:
        return Scenario(
            n_cells=int(d["n_cells"]),
            n_subcarriers=int(d["n_subcarriers"]),
            bs_positions=np.array(d["bs_positions_m"], dtype=float).reshape(-1, 2),
            user_positions=np.array(d["user_positions_m"], dtype=float),
            gains=np.array(d["gains"], dtype=float),
            sigma2=float(d["sigma2_w"]),
            p_max=float(d["p_max_w"]),
            bandwidth_hz=float(d["bandwidth_hz"]),
            isd_m=float(d["isd_m"]),
            seed=int(d["seed"]),
        )
    except KeyError as exc:
        raise InvalidConfigError(f"scenario file lacks field {exc}") from None


def dumps_scenario(sc: Scenario) -> str:
    # repr-based float formatting round-trips exactly and ignores locale
    return json.dumps(scenario_to_dict(sc), indent=1) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc), encoding="utf-8")


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}: not a scenario file ({exc})") from None
    return scenario_from_dict(data)


def read_flat_config(path) -> dict:
    """``key = value`` lines (``#`` comments allowed) into a dict of strings."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
    return {k.replace("-", "_"): v.strip() for k, v in parser["run"].items()}


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return x


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(header, rows))


def read_csv(path) -> tuple[list, list]:
    with open(path, encoding="utf-8", newline="") as fh:
        data = list(csv.reader(fh))
    return data[0], data[1:]
