"""Run configuration and the plain ``key=value`` config file format."""

from dataclasses import asdict, dataclass, fields


@dataclass
class ReconConfig:
    # defaults follow the reported experiment setup: 64x64 patches, 50% overlap, 4 iterations
    patch: tuple = (64, 64)
    overlap_y: float = 0.5
    overlap_z: float = 0.5
    stopband: int = 10
    pad: int = 10
    iters: int = 4
    features: int = 16
    checkpoint: str = ""
    workers: int = 1
    seed: int = 0
    R: float = 5.4
    density: str = "variable"
    calib: int = 20

    @property
    def overlap(self):
        return (self.overlap_y, self.overlap_z)


def parse_value(text, current):
    text = text.strip()
    if isinstance(current, tuple):
        parts = [p for p in text.replace("x", ",").split(",") if p.strip()]
        vals = tuple(type(current[0])(p) for p in parts)
        return vals * 2 if len(vals) == 1 else vals
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes")
    return type(current)(text)


def read_config_file(path):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve(cls, file_values=None, overrides=None):
    """Build ``cls`` from defaults, then config-file strings, then typed overrides."""
    obj = cls()
    names = {f.name for f in fields(cls)}
    for key, text in (file_values or {}).items():
        if key not in names:
            raise ValueError(f"unknown config key {key!r}")
        setattr(obj, key, parse_value(text, getattr(obj, key)))
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in names:
                raise ValueError(f"unknown config key {key!r}")
            setattr(obj, key, value)
    return obj


def write_config(path, obj):
    with open(path, "w") as f:
        for key, value in asdict(obj).items():
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            f.write(f"{key}={value}\n")
