from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional
import csv
import math
import numpy as np
from pydantic import BaseModel, validator
import orjson as json
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from app.qtel import slog

SUPPORTED_PLOTS = Literal["line", "errorbar", "bar"]

Cell = Optional[float | int | str]
Column = List[Cell]

# 800×600 viewBox: matplotlib sizes SVGs in points
FIGSIZE_IN = (800 / 72, 600 / 72)
SVG_HASH_SALT = "qtel"


def format_cell(v: Cell) -> str:
    """
    17 significant digits so a CSV round-trips floats bit-exactly
    """
    match v:
        case None:
            return ""
        case bool():
            return "true" if v else "false"
        case int():
            return str(v)
        case float():
            if math.isnan(v):
                return "nan"
            return format(v, ".17g")
        case _:
            return str(v)


class TableContent(BaseModel):
    """
    Column-ordered table written as RFC-4180 CSV
    """
    data: Dict[str, Column]

    class Config:
        frozen = True

    @validator("data")
    def _check_lengths(cls, v: Dict[str, Column]) -> Dict[str, Column]:
        lengths = {len(c) for c in v.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns differ in length: {sorted(lengths)}")
        return v

    @property
    def rows(self) -> int:
        return len(next(iter(self.data.values()), []))

    def write(self, path: Path) -> Path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\r\n")
            writer.writerow(list(self.data))
            for i in range(self.rows):
                writer.writerow([format_cell(c[i]) for c in self.data.values()])
        slog().info("file written", path=str(path))
        return path


class Series(BaseModel):
    label: str
    x: List[float]
    y: List[Optional[float]]
    yerr: Optional[List[Optional[float]]] = None

    class Config:
        frozen = True


class PlotContent(BaseModel):
    plot_type: SUPPORTED_PLOTS
    series: List[Series]
    title: str
    xlabel: str
    ylabel: str
    # vertical reference lines (x, label)
    markers: List[tuple[float, str]] = []

    class Config:
        frozen = True

    def _draw(self, ax) -> None:
        width = 0.8 / max(1, len(self.series))
        for k, s in enumerate(self.series):
            pts = [(x, y, None if s.yerr is None else s.yerr[i])
                   for i, (x, y) in enumerate(zip(s.x, s.y)) if y is not None]
            if not pts:
                continue
            xs = np.array([p[0] for p in pts], dtype=float)
            ys = np.array([p[1] for p in pts], dtype=float)
            match self.plot_type:
                case "line":
                    ax.plot(xs, ys, marker=".", label=s.label)
                case "errorbar":
                    errs = np.array([0.0 if p[2] is None else p[2] for p in pts])
                    ax.errorbar(xs, ys, yerr=errs, fmt="o", capsize=3,
                                label=s.label)
                case "bar":
                    ax.bar(xs + (k - (len(self.series) - 1) / 2) * width, ys,
                           width=width, label=s.label)

    def write(self, path: Path, overlay: Optional["PlotContent"] = None) -> Path:
        plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
        fig, ax = plt.subplots(figsize=FIGSIZE_IN)
        try:
            self._draw(ax)
            if overlay is not None:
                overlay._draw(ax)
            for x, label in self.markers:
                ax.axvline(x, color="grey", linestyle="--", linewidth=1,
                           label=label)
            ax.set_title(self.title)
            ax.set_xlabel(self.xlabel)
            ax.set_ylabel(self.ylabel)
            ax.grid(True, alpha=0.3)
            ax.legend(loc="best")
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        slog().info("file written", path=str(path))
        return path


def _default(obj: Any) -> Any:
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="python")
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _finite(obj: Any) -> Any:
    # orjson writes NaN/inf as null; make that explicit before dumping
    match obj:
        case float() if not math.isfinite(obj):
            return None
        case dict():
            return {str(k.value if isinstance(k, Enum) else k): _finite(v)
                    for k, v in obj.items()}
        case list() | tuple():
            return [_finite(v) for v in obj]
        case np.ndarray():
            return _finite(obj.tolist())
        case complex():
            return [_finite(obj.real), _finite(obj.imag)]
        case np.floating():
            return _finite(float(obj))
        case np.integer():
            return int(obj)
        case _:
            return obj


def dumps(doc: Dict[str, Any]) -> bytes:
    return json.dumps(  # pylint: disable=maybe-no-member
        _finite(doc),
        default=_default,
        option=json.OPT_SORT_KEYS | json.OPT_INDENT_2)  # pylint: disable=maybe-no-member


def matrix_json(m: np.ndarray) -> List[List[List[float]]]:
    """
    complex matrix as nested [re, im] pairs
    """
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


class CommandReport(BaseModel):
    command: str
    config_echo: Dict[str, Any]
    results: Dict[str, Any]
    warnings: List[str] = []
    exit_code: int = 0

    class Config:
        frozen = True

    def document(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_echo": self.config_echo,
            "results": self.results,
            "warnings": list(self.warnings),
        }

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "summary.json"
        path.write_bytes(dumps(self.document()) + b"\n")
        slog().info("file written", path=str(path))
        return path


def ensure_out(out: str | Path) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path
