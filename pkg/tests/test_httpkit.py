"""HTTP client plumbing: keep-alive reuse, error mapping, readiness."""

import threading

import pytest

from healthvault.errors import (
    HealthVaultError,
    RegistryUnreachable,
    UnknownInstance,
)
from healthvault.httpkit import JsonClient, TransportFailure, expect, wait_until_ready


@pytest.fixture
def client(cluster):
    c = JsonClient(cluster.registry_url, ca_file=cluster.cert_path)
    yield c
    c.close()


def test_request_returns_status_and_body(client):
    status, body = client.request("GET", "/health")
    assert status == 200
    assert body["service"] == "registry"


def test_connection_is_reused_across_requests(client):
    client.request("GET", "/health")
    first = client._local.conn
    client.request("GET", "/health")
    assert client._local.conn is first


def test_connections_are_per_thread(client):
    client.request("GET", "/health")
    main_conn = client._local.conn
    seen = {}

    def worker():
        client.request("GET", "/health")
        seen["conn"] = client._local.conn

    t = threading.Thread(target=worker)
    t.start()
    t.join()
    assert seen["conn"] is not main_conn


def test_dead_port_raises_transport_failure():
    c = JsonClient("http://127.0.0.1:9")
    with pytest.raises(TransportFailure):
        c.request("GET", "/health")
    c.close()


def test_expect_maps_transport_loss_to_domain_error():
    c = JsonClient("http://127.0.0.1:9")
    with pytest.raises(RegistryUnreachable):
        expect(c, "GET", "/health", unreachable=RegistryUnreachable)
    c.close()


def test_expect_reraises_typed_service_error(cluster, client):
    with pytest.raises(UnknownInstance):
        expect(
            client,
            "POST",
            "/reregister",
            body={"instance_id": "inst-nope", "admin_token": cluster.admin_token},
            unreachable=RegistryUnreachable,
        )


def test_expect_surfaces_untyped_http_errors(client):
    # A framework 404 has no error code; it still raises, as the base type.
    with pytest.raises(HealthVaultError):
        expect(client, "GET", "/no-such-endpoint", unreachable=RegistryUnreachable)


def test_wait_until_ready(cluster):
    wait_until_ready(cluster.registry_url, deadline_s=5.0)  # no raise
    with pytest.raises(TransportFailure):
        wait_until_ready("http://127.0.0.1:9", deadline_s=0.3)
