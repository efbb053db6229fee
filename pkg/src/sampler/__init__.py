from src.sampler.group_sampler import (
    ComparisonGroup, GroupBatcher, SamplerConfig, count_groups, enumerate_groups, sample_groups,
)
