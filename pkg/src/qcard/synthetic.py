"""Synthetic digested workloads for tests, demos, and the acceptance suite."""
from __future__ import annotations

import math

import numpy as np

from .workload import QueryFeature, SchemaCatalog, Workload

KINDS = ("biased", "constant", "overestimate", "job-light-shaped")


def random_slots(rng: np.random.Generator, table_count: int, max_tables: int) -> tuple:
    k = int(rng.integers(1, max_tables + 1))
    ids = sorted(rng.choice(np.arange(1, table_count + 1), size=k, replace=False).tolist())
    return tuple((int(t), float(rng.integers(0, 1001)) / 1000) for t in ids)


def biased_workload(n_queries: int = 50, bias: float = 1.5, table_count: int = 6, max_tables: int = 4,
                    seed: int = 0, card_range=(1_000, 1_000_000)) -> Workload:
    """Classical estimates are the truth scaled by ``exp(bias)``, rounded to integers.

    True cardinalities are log-uniform in ``card_range``; with the default
    range the rounding moves the log bias by less than 1e-3.
    """
    rng = np.random.default_rng(seed)
    lo, hi = math.log(card_range[0]), math.log(card_range[1])
    queries = []
    for i in range(n_queries):
        true = int(round(math.exp(rng.uniform(lo, hi))))
        classical = max(1, int(round(true * math.exp(bias))))
        queries.append(QueryFeature(f"q{i + 1}", random_slots(rng, table_count, max_tables), true, classical))
    return Workload(queries, SchemaCatalog.anonymous(table_count))


def constant_workload(n_queries: int = 20, cardinality: int = 7, table_count: int = 6, max_tables: int = 4,
                      seed: int = 0) -> Workload:
    rng = np.random.default_rng(seed)
    queries = [
        QueryFeature(f"q{i + 1}", random_slots(rng, table_count, max_tables), cardinality)
        for i in range(n_queries)
    ]
    return Workload(queries, SchemaCatalog.anonymous(table_count))


def overestimate_workload(n_queries: int = 30, low: float = 0.5, high: float = 2.5, table_count: int = 6,
                          max_tables: int = 4, seed: int = 0) -> Workload:
    """Every classical estimate exceeds the truth by a log factor drawn from [low, high]."""
    rng = np.random.default_rng(seed)
    queries = []
    for i in range(n_queries):
        true = int(rng.integers(1_000, 100_000))
        classical = int(math.ceil(true * math.exp(rng.uniform(low, high))))
        queries.append(QueryFeature(f"q{i + 1}", random_slots(rng, table_count, max_tables), true, classical))
    return Workload(queries, SchemaCatalog.anonymous(table_count))


def job_light_shaped(seed: int = 0) -> Workload:
    """70 queries over 6 tables, up to 6 slots each, cardinalities spread over many magnitudes."""
    rng = np.random.default_rng(seed)
    queries = []
    for i in range(70):
        true = int(round(math.exp(rng.uniform(0, 18))))
        noise = rng.normal(0, 2.0)
        classical = max(1, int(round(true * math.exp(noise))))
        queries.append(QueryFeature(f"q{i + 1}", random_slots(rng, 6, 6), max(true, 1), classical))
    names = ["cast_info", "movie_companies", "movie_info", "movie_info_idx", "movie_keyword", "title"]
    return Workload(queries, SchemaCatalog.anonymous(6, names))


def make(kind: str, seed: int = 0, **kwargs) -> Workload:
    if kind == "biased":
        return biased_workload(seed=seed, **kwargs)
    if kind == "constant":
        return constant_workload(seed=seed, **kwargs)
    if kind == "overestimate":
        return overestimate_workload(seed=seed, **kwargs)
    if kind == "job-light-shaped":
        return job_light_shaped(seed=seed)
    raise ValueError(f"unknown fixture kind {kind!r}; choose from {KINDS}")
