"""Network parameters and shared semantic types.

Every symbol used by the coverage/rate equations and the simulator has
exactly one home here.  All quantities are stored linear internally
(watts, unitless gains, radians, Hz); decibel values are accepted only
at the config-file boundary and converted at parse time.  The on-disk
format is INI (sections of key=value pairs); see ``docs/config.md`` for
the schema and ``configs/table1.ini`` for the canonical example.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import warnings
from dataclasses import dataclass, field, fields, replace

__all__ = [
    "ConfigError",
    "GainDistribution",
    "NetworkConfig",
    "interferer_gain_distribution",
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watt",
    "watt_to_dbm",
]

# (link type, tier) pairs: access/backhaul x macro/small.
LINK_KEYS = ("a_m", "a_s", "b_m", "b_s")


class ConfigError(ValueError):
    """Invalid configuration value or file."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watt_to_dbm(x_w: float) -> float:
    return 10.0 * math.log10(x_w) + 30.0


@dataclass
class GainDistribution:
    """Four-point effective antenna gain distribution of an interferer."""

    values: list[float]
    probabilities: list[float]

    def __post_init__(self):
        if len(self.values) != 4 or len(self.probabilities) != 4:
            raise ConfigError("gain distribution must have exactly 4 points")
        if any(v <= 0 for v in self.values):
            raise ConfigError("gains must be strictly positive")
        if any(p < 0 or p > 1 for p in self.probabilities):
            raise ConfigError("probabilities must lie in [0, 1]")
        if abs(sum(self.probabilities) - 1.0) > 1e-12:
            raise ConfigError("probabilities must sum to 1")

    def mean(self) -> float:
        return sum(v * p for v, p in zip(self.values, self.probabilities))


@dataclass(eq=True)
class NetworkConfig:
    """All physical and deployment parameters of the two-tier network.

    Units: densities per km^2, powers in watts, gains/biases linear,
    beamwidths in radians, bandwidth in Hz, noise PSD in W/Hz (noise
    figure already folded in), blockage segment length and ``mu`` in
    meters.  Immutable by convention: use :meth:`with_updates` to
    derive variants.

    ``mu`` is the LOS range constant of the independent-blocking
    approximation; it may be left unset (None) until calibrated against
    the sampled blockage process.
    """

    # deployment densities (per km^2)
    lambda_m: float = 10.0
    lambda_s: float = 50.0
    lambda_u: float = 1000.0
    # transmit powers (W); Table-1 defaults 40 / 20 dBm
    p_m: float = dbm_to_watt(40.0)
    p_s: float = dbm_to_watt(20.0)
    # association biases (linear)
    t_m: float = 1.0
    t_s: float = 1.0
    # antenna gains (linear); 18 / -2 dB at BSs, 0 dB at UEs
    g_main_m: float = db_to_linear(18.0)
    g_side_m: float = db_to_linear(-2.0)
    g_main_s: float = db_to_linear(18.0)
    g_side_s: float = db_to_linear(-2.0)
    g_main_u: float = 1.0
    g_side_u: float = 1.0
    # main-lobe beamwidths (rad); not fixed by Table 1 -- defaults are
    # ours: 30 deg at BSs, 60 deg at the UE
    theta_m: float = math.radians(30.0)
    theta_s: float = math.radians(30.0)
    theta_u: float = math.radians(60.0)
    # pathloss exponents and 1 m reference loss per (link type, tier)
    alpha_los: dict = field(default_factory=lambda: {k: 3.0 for k in LINK_KEYS})
    alpha_nlos: dict = field(default_factory=lambda: {k: 4.0 for k in LINK_KEYS})
    beta: dict = field(default_factory=lambda: {k: db_to_linear(-70.0) for k in LINK_KEYS})
    # system bandwidth (Hz); not fixed by Table 1 -- our default
    bandwidth_w: float = 600e6
    # noise PSD (W/Hz) = -174 dBm/Hz + 10 dB noise figure
    noise_psd: float = dbm_to_watt(-174.0 + 10.0)
    # access bandwidth fraction for the static-split allocation
    eta_a: float = 0.8
    # blockage germ-grain process: segment density (per km^2), length (m)
    blockage_density: float = 1500.0
    blockage_length: float = 5.0
    # LOS range constant (m); None until calibrated
    mu: float | None = 200.0
    # model switches (sensitivity runs; defaults match the analysis)
    mbs_interference: bool = False
    backhaul_interference: bool = False
    blockage_model: str = "germ_grain"
    # raw file values retained for lossless serialization
    _boundary: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------
    def validate(self) -> None:
        pos = {
            "lambda_m": self.lambda_m,
            "lambda_u": self.lambda_u,
            "p_m": self.p_m,
            "p_s": self.p_s,
            "t_m": self.t_m,
            "t_s": self.t_s,
            "g_main_m": self.g_main_m,
            "g_side_m": self.g_side_m,
            "g_main_s": self.g_main_s,
            "g_side_s": self.g_side_s,
            "g_main_u": self.g_main_u,
            "g_side_u": self.g_side_u,
            "theta_m": self.theta_m,
            "theta_s": self.theta_s,
            "theta_u": self.theta_u,
            "bandwidth_w": self.bandwidth_w,
            "noise_psd": self.noise_psd,
            "blockage_length": self.blockage_length,
        }
        for name, val in pos.items():
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {val!r}")
        for name, val in (("lambda_s", self.lambda_s), ("blockage_density", self.blockage_density)):
            if not (math.isfinite(val) and val >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {val!r}")
        for th in (self.theta_m, self.theta_s, self.theta_u):
            # 2*pi itself is the degenerate isotropic beam and is allowed
            if th > 2 * math.pi:
                raise ConfigError("beamwidths must be <= 2*pi")
        for k in LINK_KEYS:
            al, an, b = self.alpha_los[k], self.alpha_nlos[k], self.beta[k]
            if not (an >= al > 2.0):
                raise ConfigError(f"need alpha_nlos >= alpha_los > 2 for link {k}")
            if not (math.isfinite(b) and b > 0):
                raise ConfigError(f"beta[{k}] must be finite and > 0")
        if not (0.0 < self.eta_a < 1.0):
            raise ConfigError(f"eta_a must lie in (0, 1), got {self.eta_a}")
        if self.mu is not None and not (math.isfinite(self.mu) and self.mu > 0):
            raise ConfigError("mu must be > 0 or None")
        if self.blockage_model not in ("germ_grain", "independent"):
            raise ConfigError(f"unknown blockage_model {self.blockage_model!r}")
        # lambda_s = 0 is the macro-only baseline and skips the ordering rule
        if self.lambda_s > 0:
            if not (self.lambda_m < self.lambda_s < self.lambda_u):
                raise ConfigError(
                    "densities must satisfy lambda_m < lambda_s < lambda_u "
                    f"(got {self.lambda_m}, {self.lambda_s}, {self.lambda_u})"
                )
            if self.lambda_s < 2 * self.lambda_m or self.lambda_u < 2 * self.lambda_s:
                warnings.warn(
                    "density ordering margins are small; full-buffer load model "
                    "may be inaccurate",
                    stacklevel=2,
                )
        elif self.lambda_m >= self.lambda_u:
            raise ConfigError("need lambda_m < lambda_u")

    # -- derived quantities --------------------------------------------
    def noise_power(self) -> float:
        """Total noise power over the system bandwidth (W)."""
        return self.noise_psd * self.bandwidth_w

    def power(self, tier: str) -> float:
        return self.p_m if tier == "m" else self.p_s

    def bias(self, tier: str) -> float:
        return self.t_m if tier == "m" else self.t_s

    def gain_main(self, node: str) -> float:
        return {"m": self.g_main_m, "s": self.g_main_s, "u": self.g_main_u}[node]

    def gain_side(self, node: str) -> float:
        return {"m": self.g_side_m, "s": self.g_side_s, "u": self.g_side_u}[node]

    def beamwidth(self, node: str) -> float:
        return {"m": self.theta_m, "s": self.theta_s, "u": self.theta_u}[node]

    def density(self, tier: str) -> float:
        return {"m": self.lambda_m, "s": self.lambda_s, "u": self.lambda_u}[tier]

    def with_updates(self, **kwargs) -> "NetworkConfig":
        """Copy with selected fields replaced (re-validated)."""
        return replace(self, _boundary=None, **kwargs)

    def require_mu(self) -> float:
        if self.mu is None:
            raise ConfigError("mu is unset; run calibration first")
        return self.mu

    def hash(self) -> str:
        """Short stable digest identifying the parameter set."""
        payload = self.to_ini_str().encode()
        return hashlib.sha256(payload).hexdigest()[:12]

    # -- file I/O -------------------------------------------------------
    @classmethod
    def from_ini_str(cls, text: str) -> "NetworkConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file: {exc}") from exc
        raw = {s: dict(cp[s]) for s in cp.sections()}
        return cls._from_boundary(raw)

    @classmethod
    def load(cls, path) -> "NetworkConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_ini_str(fh.read())

    def to_ini_str(self) -> str:
        raw = self._boundary if self._boundary is not None else self._compute_boundary()
        cp = configparser.ConfigParser()
        for section in ("network", "radio", "pathloss", "blockage", "model"):
            if section in raw:
                cp[section] = {k: str(v) for k, v in raw[section].items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_ini_str())

    def _compute_boundary(self) -> dict:
        r = repr
        raw = {
            "network": {
                "lambda_m_per_km2": r(self.lambda_m),
                "lambda_s_per_km2": r(self.lambda_s),
                "lambda_u_per_km2": r(self.lambda_u),
            },
            "radio": {
                "p_m_dbm": r(watt_to_dbm(self.p_m)),
                "p_s_dbm": r(watt_to_dbm(self.p_s)),
                "t_m_db": r(linear_to_db(self.t_m)),
                "t_s_db": r(linear_to_db(self.t_s)),
                "g_main_m_db": r(linear_to_db(self.g_main_m)),
                "g_side_m_db": r(linear_to_db(self.g_side_m)),
                "g_main_s_db": r(linear_to_db(self.g_main_s)),
                "g_side_s_db": r(linear_to_db(self.g_side_s)),
                "g_main_u_db": r(linear_to_db(self.g_main_u)),
                "g_side_u_db": r(linear_to_db(self.g_side_u)),
                "theta_m_deg": r(math.degrees(self.theta_m)),
                "theta_s_deg": r(math.degrees(self.theta_s)),
                "theta_u_deg": r(math.degrees(self.theta_u)),
                "bandwidth_mhz": r(self.bandwidth_w / 1e6),
                # noise figure is already folded into noise_psd; emit as-is
                "noise_psd_dbm_hz": r(watt_to_dbm(self.noise_psd)),
                "noise_figure_db": "0.0",
                "eta_a": r(self.eta_a),
            },
            "pathloss": {},
            "blockage": {
                "density_per_km2": r(self.blockage_density),
                "length_m": r(self.blockage_length),
            },
            "model": {
                "mbs_interference": str(self.mbs_interference).lower(),
                "backhaul_interference": str(self.backhaul_interference).lower(),
                "blockage_model": self.blockage_model,
            },
        }
        if self.mu is not None:
            raw["blockage"]["mu_m"] = r(self.mu)
        pl = raw["pathloss"]
        for name, table, conv in (
            ("alpha_los", self.alpha_los, r),
            ("alpha_nlos", self.alpha_nlos, r),
            ("beta_db", self.beta, lambda v: r(-linear_to_db(v))),

        ):
            vals = {k: table[k] for k in LINK_KEYS}
            if len({vals[k] for k in LINK_KEYS}) == 1:
                pl[name] = conv(vals["a_m"])
            else:
                for k in LINK_KEYS:
                    pl[f"{name}_{k}"] = conv(vals[k])
        return raw

    @classmethod
    def _from_boundary(cls, raw: dict) -> "NetworkConfig":
        known = {
            "network": {"lambda_m_per_km2", "lambda_s_per_km2", "lambda_u_per_km2"},
            "radio": {
                "p_m_dbm", "p_s_dbm", "t_m_db", "t_s_db",
                "g_main_m_db", "g_side_m_db", "g_main_s_db", "g_side_s_db",
                "g_main_u_db", "g_side_u_db",
                "theta_m_deg", "theta_s_deg", "theta_u_deg",
                "bandwidth_mhz", "noise_psd_dbm_hz", "noise_figure_db", "eta_a",
            },
            "pathloss": {f"{n}_{k}" for n in ("alpha_los", "alpha_nlos", "beta_db")
                         for k in LINK_KEYS} | {"alpha_los", "alpha_nlos", "beta_db"},
            "blockage": {"density_per_km2", "length_m", "mu_m"},
            "model": {"mbs_interference", "backhaul_interference", "blockage_model"},
        }
        for section, keys in raw.items():
            if section not in known:
                raise ConfigError(f"unknown config section [{section}]")
            for k in keys:
                if k not in known[section]:
                    raise ConfigError(f"unknown key {k!r} in section [{section}]")

        def get(section, key, default=None):
            val = raw.get(section, {}).get(key, default)
            if val is None:
                raise ConfigError(f"missing required key {key!r} in [{section}]")
            return val

        def getf(section, key, default=None):
            val = get(section, key, default)
            try:
                out = float(val)
            except ValueError as exc:
                raise ConfigError(f"{key} = {val!r} is not a number") from exc
            if not math.isfinite(out):
                raise ConfigError(f"{key} must be finite")
            return out

        def getb(section, key, default):
            val = raw.get(section, {}).get(key, default)
            if str(val).lower() not in ("true", "false"):
                raise ConfigError(f"{key} must be true or false")
            return str(val).lower() == "true"

        pl = raw.get("pathloss", {})

        def per_link(name, conv):
            base = pl.get(name)
            out = {}
            for k in LINK_KEYS:
                v = pl.get(f"{name}_{k}", base)
                if v is None:
                    raise ConfigError(f"missing pathloss key {name} (or {name}_{k})")
                out[k] = conv(float(v))
            return out

        nf = getf("radio", "noise_figure_db", "0.0")
        mu_raw = raw.get("blockage", {}).get("mu_m", "")
        cfg = cls(
            lambda_m=getf("network", "lambda_m_per_km2"),
            lambda_s=getf("network", "lambda_s_per_km2"),
            lambda_u=getf("network", "lambda_u_per_km2"),
            p_m=dbm_to_watt(getf("radio", "p_m_dbm")),
            p_s=dbm_to_watt(getf("radio", "p_s_dbm")),
            t_m=db_to_linear(getf("radio", "t_m_db")),
            t_s=db_to_linear(getf("radio", "t_s_db")),
            g_main_m=db_to_linear(getf("radio", "g_main_m_db")),
            g_side_m=db_to_linear(getf("radio", "g_side_m_db")),
            g_main_s=db_to_linear(getf("radio", "g_main_s_db")),
            g_side_s=db_to_linear(getf("radio", "g_side_s_db")),
            g_main_u=db_to_linear(getf("radio", "g_main_u_db")),
            g_side_u=db_to_linear(getf("radio", "g_side_u_db")),
            theta_m=math.radians(getf("radio", "theta_m_deg")),
            theta_s=math.radians(getf("radio", "theta_s_deg")),
            theta_u=math.radians(getf("radio", "theta_u_deg")),
            alpha_los=per_link("alpha_los", float),
            alpha_nlos=per_link("alpha_nlos", float),
            beta=per_link("beta_db", lambda v: db_to_linear(-v)),
            bandwidth_w=getf("radio", "bandwidth_mhz") * 1e6,
            noise_psd=dbm_to_watt(getf("radio", "noise_psd_dbm_hz") + nf),
            eta_a=getf("radio", "eta_a", "0.8"),
            blockage_density=getf("blockage", "density_per_km2"),
            blockage_length=getf("blockage", "length_m"),
            mu=float(mu_raw) if str(mu_raw).strip() else None,
            mbs_interference=getb("model", "mbs_interference", "false"),
            backhaul_interference=getb("model", "backhaul_interference", "false"),
            blockage_model=raw.get("model", {}).get("blockage_model", "germ_grain"),
            _boundary=raw,
        )
        return cfg


def interferer_gain_distribution(
    config: NetworkConfig, link_type: str, tier: str
) -> GainDistribution:
    """Effective antenna gain distribution of an interfering BS of `tier`.

    Interfering beams point uniformly at random, so the joint gain of the
    (transmitter, receiver) pair is a four-point distribution over
    main/side lobe combinations; the receiver is the UE for access links
    and the SBS for backhaul links.
    """
    if link_type not in ("access", "backhaul"):
        raise ConfigError(f"link_type must be 'access' or 'backhaul', got {link_type!r}")
    if tier not in ("m", "s"):
        raise ConfigError(f"tier must be 'm' or 's', got {tier!r}")
    rx = "u" if link_type == "access" else "s"
    g_tx, g_tx_side = config.gain_main(tier), config.gain_side(tier)
    g_rx, g_rx_side = config.gain_main(rx), config.gain_side(rx)
    p_tx = config.beamwidth(tier) / (2 * math.pi)
    p_rx = config.beamwidth(rx) / (2 * math.pi)
    return GainDistribution(
        values=[g_tx * g_rx, g_tx * g_rx_side, g_tx_side * g_rx, g_tx_side * g_rx_side],
        probabilities=[
            p_tx * p_rx,
            p_tx * (1 - p_rx),
            (1 - p_tx) * p_rx,
            (1 - p_tx) * (1 - p_rx),
        ],
    )
