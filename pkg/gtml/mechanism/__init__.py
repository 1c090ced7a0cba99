from .sharing import CacheEntry, SampleSharingCache, resolve_sample, tv_rule_distance
from .erm import CandidateRisk, ErmResult, empirical_risk, erm_search, exact_risk_table, sequence_risk, sup_deviation
