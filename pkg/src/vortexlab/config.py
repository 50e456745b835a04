"""Sectioned key-value configuration with unit-suffixed keys.

Flat INI-style text: [section] headers, key = value lines, # comments.
Every dimensioned key carries its unit in the name (w_um, B0_uT, T_up_us);
values are converted to SI on load. Unknown sections or keys are rejected,
so a dimensioned key without its suffix is a config error.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import CONSTANTS
from .core import DeviceModel
from .energetics import PinningSite
from .errors import ConfigError
from .rabi import HilbertTruncation, QrmParams
from .jumps import ReadoutModel, TelegraphParams
from .tunneling import TunnelModel

_DEG = math.pi / 180.0

# key -> (converter label, factor to SI); "int" and "raw" take no factor
_SCHEMA: dict[str, dict[str, tuple[str, float]]] = {
    "device": {
        "w_um": ("float", 1e-6),
        "t_nm": ("float", 1e-9),
        "length_um": ("float", 1e-6),
        "xi_nm": ("float", 1e-9),
        "lambda_L_um": ("float", 1e-6),
        "f_r_GHz": ("float", 1e9),
        "Z_r_ohm": ("float", 1.0),
    },
    "qrm": {
        "f_r_GHz": ("float", 1e9),
        "g_MHz": ("float", 1e6),
        "gamma_GHz_per_mT": ("float", 1e12),
        "B0_uT": ("float", 1e-6),
        "f_q0_GHz": ("float", 1e9),
        "theta_deg": ("float", _DEG),
        "phi_deg": ("float", _DEG),
        "n_fock": ("int", 1.0),
    },
    "pinning": {},  # dynamic siteN_* keys, see _SITE_KEY
    "tunneling": {
        "grid_points": ("int", 1.0),
        "x_min_nm": ("float", 1e-9),
        "x_max_nm": ("float", 1e-9),
        "y_zpf_nm": ("float", 1e-9),
        "k_levels": ("int", 1.0),
    },
    "jumps": {
        "T_up_us": ("float", 1e-6),
        "T_down_us": ("float", 1e-6),
        "sigma_cloud": ("float", 1.0),
        "separation_sigma": ("float", 1.0),
        "spacing_us": ("float", 1e-6),
        "tau_m_us": ("float", 1e-6),
        "duration_s": ("float", 1.0),
        "seed": ("int", 1.0),
    },
    "sweep": {
        "B_min_uT": ("float", 1e-6),
        "B_max_uT": ("float", 1e-6),
        "n_points": ("int", 1.0),
    },
}

_SITE_KEY = re.compile(r"^site(\d+)_(x_nm|y_nm|V_GHz|sigma_nm)$")
_SITE_FACTORS = {"x_nm": 1e-9, "y_nm": 1e-9, "V_GHz": 1e9 * CONSTANTS.h,
                 "sigma_nm": 1e-9}


@dataclass
class RunConfig:
    """Parsed configuration: section -> key -> SI value."""

    sections: dict[str, dict[str, float | int]]
    path: Path | None = None
    sha256: str = ""
    site_list: list[PinningSite] = field(default_factory=list)

    def has(self, section: str) -> bool:
        return section in self.sections

    def section(self, name: str) -> dict:
        if name not in self.sections:
            raise ConfigError(f"config is missing the [{name}] section")
        return self.sections[name]

    # typed accessors -------------------------------------------------

    def device(self) -> DeviceModel:
        d = self.section("device")
        try:
            return DeviceModel(w=d["w_um"], t=d["t_nm"], length=d["length_um"],
                               xi=d["xi_nm"], lambda_L=d["lambda_L_um"],
                               f_r=d["f_r_GHz"], Z_r=d["Z_r_ohm"])
        except KeyError as exc:
            raise ConfigError(f"[device] is missing key {exc}") from exc

    def qrm(self) -> tuple[QrmParams, HilbertTruncation]:
        q = self.section("qrm")
        try:
            params = QrmParams(f_r=q["f_r_GHz"], g=q["g_MHz"],
                               gamma=q["gamma_GHz_per_mT"], B0=q["B0_uT"],
                               f_q0=q["f_q0_GHz"],
                               theta=q.get("theta_deg", math.pi / 2),
                               phi=q.get("phi_deg", math.pi / 2))
        except KeyError as exc:
            raise ConfigError(f"[qrm] is missing key {exc}") from exc
        trunc = HilbertTruncation(int(q.get("n_fock", 60)))
        return params, trunc

    def sites(self) -> list[PinningSite]:
        if "pinning" not in self.sections:
            raise ConfigError("config is missing the [pinning] section")
        return list(self.site_list)

    def tunnel_model(self) -> TunnelModel:
        """Kinetic model with the curvature frequency implied by site 1.

        A Lorentzian dip of depth V and width sigma has bottom curvature
        2 V / sigma^2, so Omega = 4 V y_zpf^2 / (hbar sigma^2) once y_zpf
        fixes the mass.
        """
        t = self.section("tunneling")
        sites = self.sites()
        if not sites:
            raise ConfigError("[tunneling] needs at least one pinning site")
        y_zpf = t["y_zpf_nm"]
        s = sites[0]
        Omega = 4.0 * s.V_i * y_zpf**2 / (CONSTANTS.hbar * s.sigma_i**2)
        return TunnelModel(y_zpf=y_zpf, Omega=Omega)

    def telegraph(self) -> TelegraphParams:
        j = self.section("jumps")
        return TelegraphParams(T_up=j["T_up_us"], T_down=j["T_down_us"])

    def readout(self) -> ReadoutModel:
        j = self.section("jumps")
        sigma = j["sigma_cloud"]
        sep = j["separation_sigma"] * sigma
        return ReadoutModel(center_g=0.0 + 0.0j, center_e=complex(sep, 0.0),
                            sigma_cloud=sigma, tau_m=j["tau_m_us"],
                            spacing=j["spacing_us"])

    def seed(self, env_override: str | None = None) -> int:
        if env_override is not None:
            try:
                return int(env_override)
            except ValueError as exc:
                raise ConfigError(
                    f"VORTEXLAB_SEED must be an integer, got {env_override!r}"
                ) from exc
        if "jumps" in self.sections and "seed" in self.sections["jumps"]:
            return int(self.sections["jumps"]["seed"])
        return 0

    def sweep_fields(self) -> np.ndarray:
        s = self.section("sweep")
        for key in ("B_min_uT", "B_max_uT", "n_points"):
            if key not in s:
                raise ConfigError(f"[sweep] is missing key '{key}'")
        n = int(s["n_points"])
        if n < 1:
            raise ConfigError("[sweep] n_points must be >= 1")
        return np.linspace(s["B_min_uT"], s["B_max_uT"], n)


def _convert(section: str, key: str, raw: str):
    if section == "pinning":
        m = _SITE_KEY.match(key)
        if not m:
            raise ConfigError(
                f"unknown key '{key}' in [pinning]; expected siteN_x_nm, "
                "siteN_y_nm, siteN_V_GHz or siteN_sigma_nm")
        try:
            return float(raw) * _SITE_FACTORS[m.group(2)]
        except ValueError as exc:
            raise ConfigError(f"[pinning] {key}: not a number: {raw!r}") from exc
    schema = _SCHEMA[section]
    if key not in schema:
        raise ConfigError(f"unknown key '{key}' in [{section}] "
                          "(dimensioned keys must carry their unit suffix)")
    kind, factor = schema[key]
    try:
        if kind == "int":
            return int(raw)
        return float(raw) * factor
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from exc


def _collect_sites(pinning: dict[str, float]) -> list[PinningSite]:
    groups: dict[int, dict[str, float]] = {}
    for key, value in pinning.items():
        m = _SITE_KEY.match(key)
        groups.setdefault(int(m.group(1)), {})[m.group(2)] = value
    sites = []
    for idx in sorted(groups):
        g = groups[idx]
        missing = {"x_nm", "V_GHz", "sigma_nm"} - set(g)
        if missing:
            raise ConfigError(f"[pinning] site{idx} is missing {sorted(missing)}")
        sites.append(PinningSite(x_i=g["x_nm"], y_i=g.get("y_nm", 0.0),
                                 V_i=g["V_GHz"], sigma_i=g["sigma_nm"]))
    return sites


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a config file; raises ConfigError on any problem."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text, path=path)


def parse_config(text: str, path: Path | None = None) -> RunConfig:
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, strict=True)
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc

    sections: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        sections[section] = {key: _convert(section, key, raw)
                             for key, raw in parser[section].items()}

    sites = _collect_sites(sections.get("pinning", {}))
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RunConfig(sections=sections, path=path, sha256=digest,
                     site_list=sites)
