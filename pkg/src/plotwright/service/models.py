"""Request/response schemas for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class IssueModel(BaseModel):
    code: str
    message: str
    line: int = 0
    col: int = 0


class FindingModel(BaseModel):
    code: str
    severity: str
    subject: str
    message: str


class ValidateRequest(BaseModel):
    source: str


class ValidateResponse(BaseModel):
    ok: bool
    parse_errors: list[IssueModel] = Field(default_factory=list)
    findings: list[FindingModel] = Field(default_factory=list)


class CompileRequest(BaseModel):
    source: str
    minimizer: str = "hopcroft"
    want_dot: bool = False


class CompileResponse(BaseModel):
    ok: bool
    parse_errors: list[IssueModel] = Field(default_factory=list)
    findings: list[FindingModel] = Field(default_factory=list)
    states_before: int = 0
    states_after: int = 0
    dump: str = ""
    dot: str = ""
    wall_ms: float = 0.0


class SimulateRequest(BaseModel):
    source: str
    runs: int = 1
    seed: int = 0
    policy: str = "silence"
    horizon: int = 6
    anticipator: bool = True
    max_beats: int = 60


class RunSummary(BaseModel):
    seed: int
    trace: list[str]
    final_state: str
    outcome: str  # end | dead | stalled
    beats: int
    undesirable_entered: int
    undesirable_recovered: int
    unrecovered: bool
    interventions: int
    wall_ms: float


class SimulateResponse(BaseModel):
    ok: bool
    parse_errors: list[IssueModel] = Field(default_factory=list)
    findings: list[FindingModel] = Field(default_factory=list)
    runs: list[RunSummary] = Field(default_factory=list)
    end_state_distribution: dict[str, int] = Field(default_factory=dict)
    flagged_runs: int = 0
    unrecovered_runs: int = 0
    interventions_total: int = 0
    mean_beats: float = 0.0
    mean_wall_ms: float = 0.0
    mean_wall_ms_per_beat: float = 0.0


class BenchRequest(BaseModel):
    scenes: int = 16
    max_depth: int = 6
    branching: int = 3


class BenchRow(BaseModel):
    depth: int
    nodes: int


class LookaheadRow(BaseModel):
    horizon: int
    beats: int


class BenchResponse(BaseModel):
    scenes: int
    branching: int
    exhaustive: list[BenchRow]
    lookahead: list[LookaheadRow]


class SessionRequest(BaseModel):
    source: str
    seed: int = 0
    debug: bool = False
    horizon: int = 6
    max_beats: int = 200
    anticipator: bool = True


class SessionResponse(BaseModel):
    session_id: str
    scenario: str
    scene: str
    beat: int


class SessionStateResponse(BaseModel):
    session_id: str
    scenario: str
    scene: str
    beat: int
    finished: bool
    trace: list[str]
