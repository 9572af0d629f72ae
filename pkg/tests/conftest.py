"""Shared test configuration: offline guard and deterministic hypothesis."""
from __future__ import annotations

import socket

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "offline-deterministic",
    derandomize=True,
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("offline-deterministic")


class _NetworkBlocked(RuntimeError):
    pass


@pytest.fixture(autouse=True, scope="session")
def no_network():
    """The whole suite must run without touching the network."""

    def guard(*args, **kwargs):
        raise _NetworkBlocked("network access attempted during the test suite")

    original_connect = socket.socket.connect
    original_create = socket.create_connection
    socket.socket.connect = guard
    socket.create_connection = guard
    try:
        yield
    finally:
        socket.socket.connect = original_connect
        socket.create_connection = original_create
