"""Plain-text `key = value` configuration shared by the CLI and the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import InvalidInputError

AUTO = 0  # sentinel for mode-dependent defaults


@dataclass
class PipelineConfig:
    # Energy weights and truncations.
    theta1: float = 1.0
    theta2: float = 0.2
    theta3: float = 20.0
    tau1: float = 3.0
    tau2: float = 0.3
    # Particle proposals.
    sigma: tuple = (0.02, 0.02, 0.02, 0.2)  # planar (a,b,c,d) proposal stds
    sigma_depth: float = 0.5                # cardboard offset proposal std, m
    rho: float = 0.9
    n_p: int = 10
    n_i: int = AUTO           # 40 planar / 20 cardboard when AUTO
    trws_iters: int = AUTO    # 30 planar / 10 cardboard when AUTO
    seed: int = 0
    mode: str = "planar"
    # Cardboard road model.
    epsilon: float = 0.2      # road threshold on mean point distance, m
    ransac_tol: float = 0.15
    ransac_iters: int = 200
    # Segmentation.
    superpixels: int = AUTO   # 800 planar / 1200 cardboard when AUTO
    compactness: float = 10.0
    slic_iters: int = 10
    # Initialization.
    smoothing_lambda: float = 1.0
    # Evaluation and dataset protocol.
    d_th: float = 3.0
    crop_height: int = 0      # 0 = no crop; the paper protocol uses 200
    h_factor: int = 6
    v_factor: int = 3

    # File keys differing from the field name (reserved words, symbols).
    _ALIASES = {"lambda": "smoothing_lambda"}

    def resolved_superpixels(self) -> int:
        if self.superpixels != AUTO:
            return self.superpixels
        return 1200 if self.mode == "cardboard" else 800

    def resolved_n_i(self) -> int:
        if self.n_i != AUTO:
            return self.n_i
        return 20 if self.mode == "cardboard" else 40

    def resolved_trws_iters(self) -> int:
        if self.trws_iters != AUTO:
            return self.trws_iters
        return 10 if self.mode == "cardboard" else 30

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls) if not f.name.startswith("_")]

    @classmethod
    def _coerce(cls, name, raw):
        if isinstance(raw, str):
            raw = raw.strip()
        ftype = {f.name: f.type for f in fields(cls)}[name]
        if name == "sigma":
            if isinstance(raw, str):
                raw = [float(t) for t in raw.replace(",", " ").split()]
            vals = tuple(float(v) for v in np.asarray(raw).reshape(-1))
            if len(vals) != 4:
                raise InvalidInputError("sigma needs 4 components")
            return vals
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return str(raw)

    def set(self, key: str, value):
        name = self._ALIASES.get(key, key)
        if name not in self.field_names():
            raise InvalidInputError(f"unknown config key {key!r}")
        setattr(self, name, self._coerce(name, value))

    @classmethod
    def from_file(cls, path):
        cfg = cls()
        cfg.update_from_file(path)
        return cfg

    def update_from_file(self, path):
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                self.set(key.strip(), value)

    def to_text(self) -> str:
        reverse = {v: k for k, v in self._ALIASES.items()}
        lines = []
        for name in self.field_names():
            value = getattr(self, name)
            if name == "sigma":
                value = ",".join(f"{v:g}" for v in value)
            lines.append(f"{reverse.get(name, name)} = {value}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())
