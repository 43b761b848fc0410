"""Scenario configuration, Monte-Carlo campaigns, result files and the CLI."""

from .campaign import (Aggregate, CampaignResult, TrialRecord, assign_clusters,
                       draw_trial_channels, place_users, run_campaign, run_scheme, run_trial,
                       trial_seed)
from .config import (PROFILES, SCHEMES, SWEEP_AXES, ConfigError, ScenarioConfig, default_config,
                     factor_irs, from_dict, load_config, validate)
from .output import RESULT_COLUMNS, TRIAL_COLUMNS, emit_results, read_results

__all__ = [name for name in dir() if not name.startswith("_")]
