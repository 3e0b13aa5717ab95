"""Rule-based complex event processing for smart-building sensor streams.

The pipeline: CSV ingestion -> RDF triple store -> SPARQL-subset queries,
decision-tree rule induction -> replicated pub/sub transport -> CEP engine
with hot rule deployment -> risk assessment and alerting, plus a benchmark
harness.
"""

__version__ = "0.1.0"
