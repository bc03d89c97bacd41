"""Pydantic models for world configuration, manifests, fitted models and report rows."""
from pydantic import BaseModel, Field, field_validator, model_validator, ConfigDict
from typing import Optional, List, Dict, Any

# Synthetic world schemas
class WorldConfig(BaseModel):
    """Parameters of a synthetic game world. Rates are per agent unless noted."""
    agents: int = Field(2000, ge=1, description="Population size")
    days: int = Field(60, gt=0, description="Simulation horizon in days")
    seed: int = Field(42, ge=0, description="Seed of the single random generator")
    start_timestamp: int = Field(1284422400, ge=0, description="Window start (unix seconds, midnight UTC)")

    # Friendship graph (ring rewiring)
    friend_mean_degree: int = Field(8, ge=0, description="Mean friend count; even")
    rewiring_prob: float = Field(0.1, ge=0.0, le=1.0)

    # Activity
    activity_median: float = Field(0.2, ge=0.0, description="Median sessions started per day")
    activity_sigma: float = Field(1.6, ge=0.0, description="Log-normal shape of activity rates")
    peak_hour: float = Field(16.5, ge=0.0, lt=24.0, description="Local hour of peak intensity")
    peak_trough_ratio: float = Field(6.0, ge=1.0)
    weekend_multiplier: float = Field(1.3, gt=0.0)
    utc_offset_hours: float = Field(-8.0, ge=-12.0, le=14.0, description="Local time convention of the profile")

    # Sessions and parties
    party_prob: float = Field(0.5, ge=0.0, le=1.0)
    party_join_prob: float = Field(0.6, ge=0.0, le=1.0)
    party_session_mean: float = Field(12.0, ge=1.0, description="Mean consecutive games of a friend party")
    solo_session_mean: float = Field(1.25, ge=1.0, description="Mean consecutive games of solo play")
    party_split_prob: float = Field(0.05, ge=0.0, le=1.0, description="Chance a party is split across teams for one game")

    # Matchmaking and playlists
    team_size: int = Field(4, ge=1)
    playlist_count: int = Field(4, ge=1)
    vehicle_playlists: int = Field(2, ge=0)
    playlist_concentration: float = Field(0.8, gt=0.0, description="Dirichlet concentration of playlist preferences")

    # Cooperative counters (Poisson rates per game)
    assist_rate: float = Field(0.6, ge=0.0)
    friend_assist_multiplier: float = Field(3.0, ge=0.0)
    indirect_rate: float = Field(0.3, ge=0.0)
    friend_indirect_multiplier: float = Field(2.0, ge=0.0)
    betrayal_rate: float = Field(0.02, ge=0.0)
    friend_betrayal_multiplier: float = Field(40.0, ge=0.0)

    # Survey
    respondent_fraction: float = Field(0.25, gt=0.0, le=1.0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("friend_mean_degree")
    @classmethod
    def validate_degree(cls, v: int) -> int:
        if v % 2:
            raise ValueError("friend_mean_degree must be even")
        return v

    @model_validator(mode="after")
    def validate_world(self) -> "WorldConfig":
        if self.party_session_mean <= self.solo_session_mean:
            raise ValueError("party_session_mean must exceed solo_session_mean")
        if self.vehicle_playlists > self.playlist_count:
            raise ValueError("vehicle_playlists cannot exceed playlist_count")
        return self


# Run bookkeeping
class RunManifest(BaseModel):
    """Everything needed to reproduce one CLI run."""
    subcommand: str
    config: Dict[str, Any] = Field(default_factory=dict, description="Resolved flag and setting values")
    inputs: Dict[str, str] = Field(default_factory=dict, description="Input path -> sha256")
    seed: Optional[int] = None
    version: str


# Learning schemas
class LogisticModel(BaseModel):
    """Single-feature logistic model: logit P(friend) = intercept + theta * x."""
    feature: str = ""
    intercept: float
    theta: float
    sigma: float = Field(..., description="Standard error of theta from the inverse observed information")
    z: float = Field(..., description="|theta| / sigma")
    p: float = Field(..., description="Two-sided p-value")
    iterations: int = 0
    converged: bool = True
    separated: bool = False


class FeatureTableRow(BaseModel):
    feature: str
    model: LogisticModel
    auc: float


class RobustnessPoint(BaseModel):
    bin_lo: int
    bin_hi: int
    feature: str
    mean_auc: Optional[float] = None
    se: Optional[float] = None
    n_pairs: int
    permutations_used: int = 0
    skipped: bool = False


class TreeComparisonRow(BaseModel):
    feature_set: str
    features: List[str]
    mean_auc: float
    error_rate: float
    naive_error: float
    root_feature: Optional[str]
    mean_nodes: float
    repeats: int


class ClassSummaryRow(BaseModel):
    feature: str
    friend_mean: float
    friend_sd: float
    nonfriend_mean: float
    nonfriend_sd: float


class RecoveryScore(BaseModel):
    threshold: float
    precision: float
    recall: float
    f1: float
    eligible_pairs: int
