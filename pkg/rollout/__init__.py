from .episode import EpisodeResult, run_policy_episode
from .evaluate import EvalReport, TrialRecord, evaluate
from .metrics import MetricError, Outcome, TaskSpec, assess, make_predicate, measure_completion_time, measure_frequency
