from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, start_http_server


class TrainingTelemetry:
    """Spans around runs and phases plus Prometheus training counters.

    Exporters are opt-in: spans leave the process only with an OTLP endpoint and
    metrics are served only with a port.
    """

    def __init__(
        self,
        service_name: str = "sunkcost",
        otlp_endpoint: str | None = None,
        metrics_port: int | None = None,
        registry: CollectorRegistry | None = None,
    ):
        self.service_name = service_name
        self.registry = registry if registry is not None else CollectorRegistry()
        self._setup_tracer(otlp_endpoint)
        self._setup_metrics(metrics_port)

    def _setup_tracer(self, endpoint: str | None):
        resource = Resource.create({"service.name": self.service_name})
        self.provider = TracerProvider(resource=resource)
        if endpoint:
            exporter = OTLPSpanExporter(endpoint=endpoint)
            self.provider.add_span_processor(BatchSpanProcessor(exporter))
            logging.info(f"Exporting spans to {endpoint}")
        self.tracer = self.provider.get_tracer(self.service_name)

    def _setup_metrics(self, port: int | None):
        self.iterations_total = Counter(
            "sunkcost_iterations_total", "Optimizer steps taken", ["arm"], registry=self.registry
        )
        self.runs_total = Counter(
            "sunkcost_runs_total", "Finished training runs", ["arm", "status"],
            registry=self.registry,
        )
        self.run_duration = Histogram(
            "sunkcost_run_duration_seconds", "Wall clock per training run", registry=self.registry
        )
        self.train_loss = Gauge(
            "sunkcost_train_loss", "Latest training loss", ["arm"], registry=self.registry
        )
        if port:
            start_http_server(port, registry=self.registry)
            logging.info(f"Serving metrics on :{port}")

    @contextmanager
    def span(self, name: str, **attributes: str | int | float) -> Iterator[trace.Span]:
        with self.tracer.start_as_current_span(name) as span:
            for key, value in attributes.items():
                span.set_attribute(key, value)
            yield span

    def record_iterations(self, arm: str, count: int):
        if count > 0:
            self.iterations_total.labels(arm=arm).inc(count)

    def record_loss(self, arm: str, loss: float):
        self.train_loss.labels(arm=arm).set(loss)

    def record_run(self, arm: str, status: str, duration_s: float):
        self.runs_total.labels(arm=arm, status=status).inc()
        self.run_duration.observe(duration_s)

    def shutdown(self):
        self.provider.shutdown()
