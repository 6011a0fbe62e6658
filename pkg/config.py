import json
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from errors import ConfigError

# Load environment variables
load_dotenv()


class Settings(BaseModel):
    budget: int = 10**8
    table_cap: int = 2**24
    out_dir: str = "out"
    seed: int = 0
    log_level: str = "INFO"


def get_settings() -> Settings:
    """Reads WZ_* environment variables, falling back to the defaults."""
    env = {
        "budget": os.getenv("WZ_BUDGET"),
        "table_cap": os.getenv("WZ_TABLE_CAP"),
        "out_dir": os.getenv("WZ_OUT_DIR"),
        "seed": os.getenv("WZ_SEED"),
        "log_level": os.getenv("WZ_LOG_LEVEL"),
    }
    try:
        return Settings(**{k: v for k, v in env.items() if v})
    except ValidationError as e:
        raise ConfigError(f"Invalid WZ_* environment setting: {e}") from e


# --- Documents ---

class ModelDocument(BaseModel):
    alphabet_x: int = Field(ge=1)
    alphabet_y: int = Field(ge=1)
    alphabet_xhat: int = Field(ge=1)
    channel: List[List[float]]
    distortion: Union[Literal["hamming"], List[List[float]]] = "hamming"
    sequence: Optional[List[int]] = None

    @model_validator(mode="after")
    def check_shapes(self):
        if len(self.channel) != self.alphabet_x or any(len(r) != self.alphabet_y for r in self.channel):
            raise ValueError(f"channel must be {self.alphabet_x}x{self.alphabet_y}")
        if self.distortion == "hamming":
            if self.alphabet_x != self.alphabet_xhat:
                raise ValueError("hamming distortion needs alphabet_x == alphabet_xhat")
        elif len(self.distortion) != self.alphabet_x or any(len(r) != self.alphabet_xhat for r in self.distortion):
            raise ValueError(f"distortion must be {self.alphabet_x}x{self.alphabet_xhat}")
        if self.sequence is not None and any(s < 0 or s >= self.alphabet_x for s in self.sequence):
            raise ValueError("sequence symbol outside alphabet_x")
        return self


class DrfParams(BaseModel):
    block: int = Field(default=1, ge=1)
    usize: Optional[int] = None
    lambdas: Optional[List[float]] = None
    lambda_count: int = Field(default=64, ge=1)
    restarts: int = Field(default=16, ge=1)
    dms: Optional[List[float]] = None


class FsmOptParams(BaseModel):
    states: int = Field(default=1, ge=1)
    delay: int = Field(default=0, ge=0)
    lmax: int = Field(default=1, ge=1)
    rate: float = Field(default=0.0, ge=0.0)


class CodecParams(BaseModel):
    action: Literal["encode", "decode"] = "encode"
    block: int = Field(default=2, ge=1)
    rate: float = Field(default=0.5, ge=0.0)
    usize: Optional[int] = None
    lambda_count: int = Field(default=32, ge=1)
    restarts: int = Field(default=8, ge=1)
    solver_seed: int = 0
    time_sharing: bool = False
    stream: Optional[str] = None
    sideinfo: Optional[List[int]] = None


class GrowthParams(BaseModel):
    action: Literal["sweep", "wrap"] = "sweep"
    theta: float = Field(default=0.5, gt=0.0)
    ns: List[int] = Field(default_factory=lambda: [10**3, 10**4, 10**5, 10**6, 10**7])
    rate: float = 0.0
    dist: float = 0.0
    states: int = Field(default=1, ge=1)
    delay: int = Field(default=0, ge=0)
    lmax: int = Field(default=1, ge=1)


class SrParams(BaseModel):
    block: int = Field(default=1, ge=1)
    rate: float = 0.5
    delta_rate: float = 0.5
    channel3: List[List[List[float]]]
    distortion2: Union[Literal["hamming"], List[List[float]]] = "hamming"
    u_cap: Optional[int] = None
    v_cap: Optional[int] = None


class GenParams(BaseModel):
    action: Literal["converse", "dms"] = "dms"
    m: int = Field(default=8, ge=1)
    blocks: int = Field(default=32, ge=1)
    rate: float = 0.5
    delta: float = 0.11
    rho0: Optional[List[float]] = None
    p: List[float] = Field(default_factory=lambda: [0.5, 0.5])
    n: int = Field(default=64, ge=1)


class LowerBoundParams(BaseModel):
    sample: Optional[int] = 256
    length: int = Field(default=12, ge=1)
    crossovers: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.3])
    rates: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0])
    blocks: List[int] = Field(default_factory=lambda: [2, 4])
    states: int = 2
    delay: int = 1
    lmax: int = 2
    lambda_count: int = 16
    restarts: int = 8


class ExperimentConfig(BaseModel):
    kind: Literal["drf", "fsm-opt", "codec", "growth", "sr", "gen", "theorem1-check"]
    model: Optional[ModelDocument] = None
    drf: DrfParams = Field(default_factory=DrfParams)
    fsm_opt: FsmOptParams = Field(default_factory=FsmOptParams)
    codec: CodecParams = Field(default_factory=CodecParams)
    growth: GrowthParams = Field(default_factory=GrowthParams)
    sr: Optional[SrParams] = None
    gen: GenParams = Field(default_factory=GenParams)
    theorem1: LowerBoundParams = Field(default_factory=LowerBoundParams)
    out_dir: Optional[str] = None
    seed: Optional[int] = None
    budget: Optional[int] = None

    @model_validator(mode="after")
    def check_blocks(self):
        needs_model = {"drf", "fsm-opt", "codec", "growth", "sr"}
        if self.kind in needs_model and self.model is None \
                and not (self.kind == "growth" and self.growth.action == "sweep"):
            raise ValueError(f"experiment '{self.kind}' needs a 'model' block")
        if self.kind == "sr" and self.sr is None:
            raise ValueError("experiment 'sr' needs an 'sr' block")
        return self


def _read_json(path: Union[str, Path]) -> dict:
    try:
        with open(path, mode="r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e


def parse_model_document(data: dict) -> ModelDocument:
    try:
        return ModelDocument.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def parse_experiment_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_model_document_file(path: Union[str, Path]) -> ModelDocument:
    return parse_model_document(_read_json(path))


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    return parse_experiment_config(_read_json(path))
