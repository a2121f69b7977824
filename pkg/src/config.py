"""Configuration management for the Lambda ES toolkit."""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="LAMBDA_ES_",
        case_sensitive=False,
        extra="ignore",
    )

    # Distribution validation
    prob_tolerance: float = Field(
        1e-12, description="Allowed deviation of total probability from 1"
    )
    merge_tolerance: float = Field(
        1e-12, description="Atoms closer than this are merged at construction"
    )
    csv_prob_tolerance: float = Field(
        1e-6, description="CSV probabilities are renormalised when within this of 1"
    )

    # Numerical tolerances
    measure_tolerance: float = Field(
        1e-10, description="Tolerance used by property checks on risk measures"
    )
    certificate_tolerance: float = Field(
        1e-10, description="Slack allowed in the crossing certificate inequalities"
    )
    level_tolerance: float = Field(
        1e-12, description="Slack in level comparisons Lambda(x) >= tau of the dual"
    )
    bisection_tolerance: float = Field(
        1e-10, description="Target bracket width of the bisection path"
    )
    bisection_max_iterations: int = Field(
        200, description="Hard cap on bisection iterations"
    )

    # Linear programming
    lp_tolerance: float = Field(1e-9, description="Pivoting tolerance of the simplex")
    lp_max_iterations: int = Field(
        50_000, description="Pivot guard of the simplex (Bland's rule cannot cycle)"
    )
    lp_max_assets: int = Field(50, description="Largest supported number of assets")
    lp_max_scenarios: int = Field(
        1000, description="Largest supported number of scenarios"
    )
    lp_residual_tolerance: float = Field(
        1e-8, description="Maximum constraint violation accepted in an LP solution"
    )

    # Verification harness
    seed: int = Field(20240517, description="Seed of the verification harness")
    property_trials: int = Field(1000, description="Trials per property sweep")
    quasi_convexity_trials: int = Field(
        2000, description="Trials of the quasi-convexity and mixture sweeps"
    )
    equivalence_trials: int = Field(
        500, description="Trials of the representation and RU equivalence sweeps"
    )
    dual_trials: int = Field(10_000, description="Random measure changes in the dual sweep")
    control_trials: int = Field(
        100_000, description="Random searches of the constant-Lambda convexity control"
    )
    l1_sequence_length: int = Field(
        64, description="Length of the perturbation sequence X + Z/n"
    )
    a1_grid_points: int = Field(
        200_001, description="Uniform grid size used to discretise the tail-expectation counterexample laws"
    )

    # Grids and output
    probe_grid_points: int = Field(
        201, description="Points of the default probe grid for convexity checks"
    )
    curve_points: int = Field(401, description="Default number of points of an ES curve")
    log_level: str = Field("INFO", description="Logging level of the command line")
    output_dir: str = Field("reports", description="Default directory for reports")


# Global settings instance
settings = Settings()
