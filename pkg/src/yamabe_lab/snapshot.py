"""Field snapshot container format.

A snapshot is a self-describing binary file:

* line 1: the magic bytes ``YLABFLD1``
* line 2: a JSON header (UTF-8, ``sort_keys``, compact separators) with

  - ``kind``: "scalar", "tensor", or "metric"
  - ``chart``: dim, resolution, periods, chart kind, and the model
    descriptor for model charts
  - ``weight``: the exact density weight as ``[numerator, denominator]``
  - ``components``: number of values per node (1, or dim*dim)
  - ``dtype``: always "<f8"

* remainder: raw little-endian float64 node data, row-major (C order),
  with the component indices trailing.

The layout is stable across versions; writers always produce identical
bytes for identical fields.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .charts import FlatTorusModel, GridChart, ProductCylinder, RoundSphere
from .fields import MetricField, ScalarField, TensorField

__all__ = ["write_field", "read_field"]

MAGIC = b"YLABFLD1\n"


def _chart_descriptor(chart: GridChart) -> dict:
    desc = {
        "dim": chart.dim,
        "resolution": list(chart.resolution),
        "periods": list(chart.periods),
        "kind": chart.kind,
    }
    model = chart.model
    if model is None:
        desc["model"] = None
    elif isinstance(model, RoundSphere):
        desc["model"] = {"type": "round-sphere", "radius": model.radius}
    elif isinstance(model, ProductCylinder):
        desc["model"] = {"type": "product-cylinder",
                         "circumference": model.circumference,
                         "sphere_radius": model.sphere_radius}
    elif isinstance(model, FlatTorusModel):
        desc["model"] = {"type": "flat-torus", "periods": list(model.periods)}
    else:
        raise ValueError(f"unknown model geometry {model!r}")
    return desc


def chart_from_descriptor(desc: dict) -> GridChart:
    model_desc = desc.get("model")
    model = None
    if model_desc is not None:
        kind = model_desc["type"]
        if kind == "round-sphere":
            model = RoundSphere(model_desc["radius"])
        elif kind == "product-cylinder":
            model = ProductCylinder(model_desc["circumference"],
                                    model_desc["sphere_radius"])
        elif kind == "flat-torus":
            model = FlatTorusModel(tuple(model_desc["periods"]))
        else:
            raise ValueError(f"unknown model type {kind!r}")
    return GridChart(desc["dim"], tuple(desc["resolution"]),
                     tuple(desc["periods"]), desc["kind"], model)


def write_field(path, field) -> None:
    """Serialize a ScalarField, TensorField, or MetricField."""
    if isinstance(field, MetricField):
        kind, weight, data = "metric", Fraction(0), field.components
    elif isinstance(field, TensorField):
        kind, weight, data = "tensor", field.weight, field.components
    elif isinstance(field, ScalarField):
        kind, weight, data = "scalar", field.weight, field.values
    else:
        raise TypeError(f"cannot snapshot {type(field).__name__}")
    n = field.chart.dim
    components = 1 if kind == "scalar" else n * n
    header = {
        "kind": kind,
        "chart": _chart_descriptor(field.chart),
        "weight": [weight.numerator, weight.denominator],
        "components": components,
        "dtype": "<f8",
    }
    payload = np.ascontiguousarray(data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True,
                            separators=(",", ":")).encode() + b"\n")
        fh.write(payload.tobytes())


def read_field(path):
    """Read a snapshot back into the matching field object."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field snapshot (bad magic)")
        header = json.loads(fh.readline().decode())
        raw = fh.read()
    chart = chart_from_descriptor(header["chart"])
    weight = Fraction(*header["weight"])
    data = np.frombuffer(raw, dtype="<f8").astype(float)
    n = chart.dim
    kind = header["kind"]
    if kind == "scalar":
        values = data.reshape(chart.resolution)
        return ScalarField(chart, values, weight)
    comps = data.reshape(chart.resolution + (n, n))
    if kind == "metric":
        return MetricField(chart, comps)
    return TensorField(chart, comps, weight)
