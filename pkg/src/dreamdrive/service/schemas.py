"""Request/response models for the HTTP API. Every artifact-writing request
is also the run's config echo, serialized next to its outputs."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class CollectRequest(BaseModel):
    seed: int = Field(0, ge=0, lt=2**64)
    steps: int = Field(..., ge=1)
    out: str
    policy: Literal["teacher"] = "teacher"


class CollectResponse(BaseModel):
    path: str
    records: int
    class_counts: dict[str, int]
    crashes: int
    sessions: int
    config_path: str


class TrainGanRequest(BaseModel):
    data: str
    out_dir: str
    epochs: int = Field(25, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    l1_weight: float = Field(10.0, ge=0)
    learning_rate: float = Field(0.002, gt=0)
    batch_size: int = Field(32, ge=1)
    shared_trunk: bool = False


class TrainGanResponse(BaseModel):
    epochs: int
    d_loss: float
    g_adv: float
    g_l1: float
    wall_seconds: float
    gen_last: str
    gen_best: str
    disc_last: str
    disc_best: str
    loss_csv: str
    config_path: str


class TrainClassifierRequest(BaseModel):
    data: str
    out_dir: str
    epochs: int = Field(25, ge=1)
    per_class: int = Field(200, ge=1)
    test_fraction: float = Field(0.25, ge=0, lt=1)
    seed: int = Field(0, ge=0, lt=2**64)
    learning_rate: float = Field(0.01, gt=0)
    batch_size: int = Field(32, ge=1)
    include_crashes: bool = True


class TrainClassifierResponse(BaseModel):
    train_size: int
    test_size: int
    cls_loss: float
    cls_train_acc: float
    test_accuracy: Optional[float]
    confusion: Optional[list[list[int]]]
    wall_seconds: float
    cls_last: str
    cls_best: str
    loss_csv: str
    test_split: str
    config_path: str


class EvalRequest(BaseModel):
    data: str
    gen: Optional[str] = None
    cls: Optional[str] = None
    limit: Optional[int] = Field(None, ge=1)


class ClassifierMetrics(BaseModel):
    accuracy: float
    confusion: list[list[int]]


class GeneratorMetrics(BaseModel):
    mae: float
    identity_baseline_mae: float
    per_action_mae: list[float]


class EvalResponse(BaseModel):
    records: int
    classifier: Optional[ClassifierMetrics]
    generator: Optional[GeneratorMetrics]


class DriveRequest(BaseModel):
    seed: int = Field(0, ge=0, lt=2**64)
    steps: int = Field(..., ge=1)
    depth: int = Field(3, ge=1)
    gen: Optional[str] = None
    cls: Optional[str] = None
    oracle: bool = False
    out: Optional[str] = None


class DriveResponse(BaseModel):
    survived: int
    steps_requested: int
    crashed: bool
    crash_cause: Optional[str]
    no_safe_steps: int
    csv_path: Optional[str]
    config_path: Optional[str]


class GradcheckEntry(BaseModel):
    name: str
    max_rel_err: float
    tolerance: float
    passed: bool


class GradcheckResponse(BaseModel):
    passed: bool
    checks: list[GradcheckEntry]


class HealthResponse(BaseModel):
    status: str
    version: str
    gen_loaded: bool
    cls_loaded: bool
