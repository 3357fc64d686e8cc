"""Save/load trained networks as self-describing .npz archives.

Layout (documented in the README):
  kind            "kan" | "mlp"
  dims            int vector of layer widths
  trained, seed   scalars
  kan extras      grid_lo, grid_hi, grid_intervals, grid_order,
                  spline_coef_<i>, base_weight_<i> per layer,
                  affine_scale, affine_shift
  mlp extras      activation, weight_<i>, bias_<i> per layer,
                  input_mean, input_std
"""

from __future__ import annotations

import numpy as np

from .kan import KanLayer, KanNetwork, SplineGrid
from .mlp import MlpNetwork


def save_model(net, path) -> None:
    if isinstance(net, KanNetwork):
        arrays = {
            "kind": np.array("kan"),
            "dims": np.array(net.dims, dtype=np.int64),
            "trained": np.array(net.trained),
            "seed": np.array(net.seed, dtype=np.int64),
            "grid_lo": np.array(net.layers[0].grid.lo),
            "grid_hi": np.array(net.layers[0].grid.hi),
            "grid_intervals": np.array(net.layers[0].grid.n_intervals, dtype=np.int64),
            "grid_order": np.array(net.layers[0].grid.order, dtype=np.int64),
            "affine_scale": net.affine_scale,
            "affine_shift": net.affine_shift,
        }
        for i, layer in enumerate(net.layers):
            arrays[f"spline_coef_{i}"] = layer.spline_coef
            arrays[f"base_weight_{i}"] = layer.base_weight
    elif isinstance(net, MlpNetwork):
        arrays = {
            "kind": np.array("mlp"),
            "dims": np.array(net.dims, dtype=np.int64),
            "trained": np.array(net.trained),
            "seed": np.array(net.seed, dtype=np.int64),
            "activation": np.array(net.activation),
            "input_mean": net.input_mean,
            "input_std": net.input_std,
        }
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"weight_{i}"] = w
            arrays[f"bias_{i}"] = b
    else:
        raise TypeError(f"cannot serialize {type(net).__name__}")
    np.savez(path, **arrays)


def load_model(path):
    with np.load(path, allow_pickle=False) as data:
        kind = str(data["kind"])
        dims = [int(d) for d in data["dims"]]
        if kind == "kan":
            grid = SplineGrid(
                lo=float(data["grid_lo"]),
                hi=float(data["grid_hi"]),
                n_intervals=int(data["grid_intervals"]),
                order=int(data["grid_order"]),
            )
            layers = [
                KanLayer(
                    in_dim=dims[i],
                    out_dim=dims[i + 1],
                    grid=grid,
                    spline_coef=data[f"spline_coef_{i}"].copy(),
                    base_weight=data[f"base_weight_{i}"].copy(),
                )
                for i in range(len(dims) - 1)
            ]
            return KanNetwork(
                layers=layers,
                affine_scale=data["affine_scale"].copy(),
                affine_shift=data["affine_shift"].copy(),
                trained=bool(data["trained"]),
                seed=int(data["seed"]),
            )
        if kind == "mlp":
            return MlpNetwork(
                dims=dims,
                weights=[data[f"weight_{i}"].copy() for i in range(len(dims) - 1)],
                biases=[data[f"bias_{i}"].copy() for i in range(len(dims) - 1)],
                activation=str(data["activation"]),
                input_mean=data["input_mean"].copy(),
                input_std=data["input_std"].copy(),
                trained=bool(data["trained"]),
                seed=int(data["seed"]),
            )
    raise ValueError(f"unknown model kind {kind!r} in {path}")
