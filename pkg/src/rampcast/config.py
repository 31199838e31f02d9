"""INI run configuration with documented defaults; command-line flags override it."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

from rampcast import rnn
from rampcast.binary import DETECTORS, BinaryRampConfig
from rampcast.ingest import ColumnMapping, FarmConfig
from rampcast.pipeline import MODEL_KINDS, EvalSettings, ModelSpec
from rampcast.wavelet import WaveletConfig

RATES = {"10min": 600, "hourly": 3600}
DEFAULT_LAMBDA_MAX = {600: 36, 3600: 6}

DEFAULTS = """\
[run]
out = out
seed = 0
rate = 10min
resample_min_count = 6
selection = univariate
test_fraction = 0.2
horizon = 1
column = P_tot
models = persistence, arma, arima, lstm

[ingest]
paths =
delimiter = ,
timestamp_format = iso
decimal_separator = .
col_timestamp = Date_time
col_turbine_id = Wind_turbine_name
col_P_avg = P_avg
col_Ws_avg = Ws_avg
col_Wa_avg = Wa_avg
col_Ot_avg = Ot_avg

[farm]
rated_power = 8200
expected_turbines =
cadence = 600
gap_fill_limit = 3
policy = strict

[wavelet]
lambda_min = 2
lambda_max = auto
sign_correction = true

[threshold]
quantile = 0.9
absolute =

[detect]
method = endpoint
delta_t = 6
p_val = 1000
p_rr = 100
n_nam = 6

[model.arma]
p = 3
q = 1

[model.arima]
p = 3
d = 1
q = 1

[model.lstm]
lags = 1
hidden_size = 32
epochs = 60
learning_rate = 0.01
batch_size = 64
shuffle = false
"""


class ConfigError(ValueError):
    """Carries every validation problem found, one message per item."""

    def __init__(self, problems: list[str]) -> None:
        self.problems = problems
        super().__init__("; ".join(problems))


def load(path: str | Path | None = None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep column-name case
    cp.read_string(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError([f"config file not found: {path}"])
        try:
            with path.open(encoding="utf-8") as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError([f"{path}: {exc}"]) from None
    return cp


def override(cp: configparser.ConfigParser, section: str, key: str, value) -> None:
    if value is None:
        return
    if isinstance(value, (list, tuple)):
        value = ", ".join(str(v) for v in value)
    elif isinstance(value, bool):
        value = "true" if value else "false"
    cp.set(section, key, str(value))


def dump(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


@dataclass
class RunConfig:
    out: Path
    seed: int
    interval: int
    resample_min_count: int
    column: str
    models: list[ModelSpec]
    eval: EvalSettings
    mapping: ColumnMapping
    farm: FarmConfig
    paths: list[Path]
    binary: BinaryRampConfig
    detect_method: str
    absolute_threshold: float | None = None
    problems: list[str] = field(default_factory=list)


def resolve(cp: configparser.ConfigParser) -> RunConfig:
    """Validate everything at once and raise a ``ConfigError`` listing all problems."""
    problems: list[str] = []

    def get(section, key, conv=str, check=None, why=""):
        raw = cp.get(section, key, fallback="")
        try:
            val = conv(raw)
        except (TypeError, ValueError):
            problems.append(f"[{section}] {key} = {raw!r}: expected {conv.__name__}")
            return None
        if check is not None and not check(val):
            problems.append(f"[{section}] {key} = {raw!r}: {why}")
            return None
        return val

    def boolean(raw: str) -> bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)

    rate = cp.get("run", "rate")
    if rate not in RATES:
        problems.append(f"[run] rate = {rate!r}: choose from {sorted(RATES)}")
    interval = RATES.get(rate, 600)
    seed = get("run", "seed", int)
    selection = cp.get("run", "selection")
    if selection not in ("univariate", "multivariate"):
        problems.append(f"[run] selection = {selection!r}: choose univariate or multivariate")
        selection = "univariate"
    tf = get("run", "test_fraction", float, lambda v: 0 < v < 1, "must lie in (0, 1)")
    horizon = get("run", "horizon", int, lambda v: v >= 1, "must be >= 1")
    min_count = get("run", "resample_min_count", int, lambda v: v >= 1, "must be >= 1")

    lam_min = get("wavelet", "lambda_min", int, lambda v: v >= 2, "must be >= 2")
    lm_raw = cp.get("wavelet", "lambda_max").strip()
    lam_max = DEFAULT_LAMBDA_MAX[interval] if lm_raw in ("", "auto") else get("wavelet", "lambda_max", int)
    if lam_min is not None and lam_max is not None and lam_max < lam_min:
        problems.append(f"[wavelet] lambda_max = {lam_max}: must be >= lambda_min ({lam_min})")
    sign = get("wavelet", "sign_correction", boolean)
    q = get("threshold", "quantile", float, lambda v: 0 < v < 1, "must lie in (0, 1)")
    abs_raw = cp.get("threshold", "absolute").strip()
    absolute = get("threshold", "absolute", float, lambda v: v > 0, "must be > 0") if abs_raw else None

    lstm_kw = dict(
        lags=get("model.lstm", "lags", int, lambda v: v >= 1, "must be >= 1"),
        hidden_size=get("model.lstm", "hidden_size", int, lambda v: v >= 1, "must be >= 1"),
        epochs=get("model.lstm", "epochs", int, lambda v: v >= 0, "must be >= 0"),
        learning_rate=get("model.lstm", "learning_rate", float, lambda v: v > 0, "must be > 0"),
        batch_size=get("model.lstm", "batch_size", int, lambda v: v >= 1, "must be >= 1"),
        shuffle=get("model.lstm", "shuffle", boolean),
    )
    orders = {
        "arma": (get("model.arma", "p", int, lambda v: v >= 0, ">= 0"), 0, get("model.arma", "q", int, lambda v: v >= 0, ">= 0")),
        "arima": (
            get("model.arima", "p", int, lambda v: v >= 0, ">= 0"),
            get("model.arima", "d", int, lambda v: v >= 0, ">= 0"),
            get("model.arima", "q", int, lambda v: v >= 0, ">= 0"),
        ),
    }
    names = _list(cp.get("run", "models"))
    if not names:
        problems.append("[run] models: at least one model is required")
    for m in names:
        if m not in MODEL_KINDS:
            problems.append(f"[run] models: unknown model {m!r}; choose from {list(MODEL_KINDS)}")

    mapping_kw = {
        "timestamp": cp.get("ingest", "col_timestamp"),
        "P_avg": cp.get("ingest", "col_P_avg"),
        "turbine_id": cp.get("ingest", "col_turbine_id") or None,
        "Ws_avg": cp.get("ingest", "col_Ws_avg") or None,
        "Wa_avg": cp.get("ingest", "col_Wa_avg") or None,
        "Ot_avg": cp.get("ingest", "col_Ot_avg") or None,
        "delimiter": cp.get("ingest", "delimiter").replace("\\t", "\t") or ",",
        "timestamp_format": cp.get("ingest", "timestamp_format"),
        "decimal_separator": cp.get("ingest", "decimal_separator") or ".",
    }
    if not mapping_kw["timestamp"] or not mapping_kw["P_avg"]:
        problems.append("[ingest] col_timestamp and col_P_avg are mandatory")
    rated = get("farm", "rated_power", float, lambda v: v > 0, "must be > 0")
    cadence = get("farm", "cadence", int, lambda v: v > 0, "must be > 0")
    gap = get("farm", "gap_fill_limit", int, lambda v: v >= 0, "must be >= 0")
    policy = cp.get("farm", "policy")
    if policy not in ("strict", "available"):
        problems.append(f"[farm] policy = {policy!r}: choose strict or available")

    method = cp.get("detect", "method")
    if method not in DETECTORS:
        problems.append(f"[detect] method = {method!r}: choose from {sorted(DETECTORS)}")
    bin_kw = dict(
        delta_t=get("detect", "delta_t", int, lambda v: v > 0, "must be > 0"),
        p_val=get("detect", "p_val", float, lambda v: v > 0, "must be > 0"),
        p_rr=get("detect", "p_rr", float, lambda v: v > 0, "must be > 0"),
        n_nam=get("detect", "n_nam", int, lambda v: v > 0, "must be > 0"),
    )

    if problems:
        raise ConfigError(problems)

    lstm_cfg = rnn.LSTMConfig(seed=seed, selection=selection, **lstm_kw)
    models = []
    for m in names:
        if m in orders:
            p, d, qq = orders[m]
            models.append(ModelSpec(m, p=p, d=d, q=qq))
        elif m == "lstm":
            models.append(ModelSpec(m, lstm=lstm_cfg))
        else:
            models.append(ModelSpec(m))

    return RunConfig(
        out=Path(cp.get("run", "out")),
        seed=seed,
        interval=interval,
        resample_min_count=min_count,
        column=cp.get("run", "column"),
        models=models,
        eval=EvalSettings(
            test_fraction=tf,
            wavelet=WaveletConfig(lam_min, lam_max, sign),
            threshold_quantile=q,
            horizon=horizon,
            power_column=cp.get("run", "column"),
        ),
        mapping=ColumnMapping(**mapping_kw),
        farm=FarmConfig(rated, tuple(_list(cp.get("farm", "expected_turbines"))), cadence, gap, policy),
        paths=[Path(p) for p in _list(cp.get("ingest", "paths"))],
        binary=BinaryRampConfig(**bin_kw),
        detect_method=method,
        absolute_threshold=absolute,
    )
