"""Test content negotiation: markdown and JSON parsing."""

from __future__ import annotations

import json
import math

import frontmatter
from starlette.requests import Request

from relayfield.content import render_response, wants_json


def _request(accept: str = "") -> Request:
    headers = [(b"accept", accept.encode())] if accept else []
    return Request({"type": "http", "method": "POST", "path": "/", "headers": headers})


async def test_json_body(client):
    resp = await client.post(
        "/v1/direct",
        json={"lambda": 1e-4, "threshold": 3.0},
        headers={"Accept": "application/json"},
    )
    assert resp.status_code == 200
    assert 0.0 < resp.json()["outage"] < 1.0


async def test_untyped_json_body(client):
    resp = await client.post(
        "/v1/direct",
        content=b'{"lambda": 0.0}',
        headers={"Accept": "application/json"},
    )
    assert resp.status_code == 200
    assert resp.json()["outage"] == 0.0


async def test_frontmatter_body_drops_the_note(client):
    body = "---\nlambda: 0.0\ndistance: 5.0\n---\nrooftop relay, first attempt\n"
    resp = await client.post(
        "/v1/direct",
        content=body.encode(),
        headers={"Content-Type": "text/markdown", "Accept": "application/json"},
    )
    assert resp.status_code == 200
    assert resp.json()["t_max"] == "inf"


async def test_broken_json_is_rejected(client):
    resp = await client.post(
        "/v1/direct",
        content=b'{"lambda": ',
        headers={"Content-Type": "application/json", "Accept": "application/json"},
    )
    assert resp.status_code == 422
    assert resp.json()["error"] == "Invalid scenario"


async def test_empty_body_uses_defaults(client):
    resp = await client.post("/v1/direct", headers={"Accept": "application/json"})
    assert resp.status_code == 200
    assert resp.json()["target"] == 1e-3


async def test_markdown_response(client):
    resp = await client.post("/v1/direct", json={"lambda": 1e-4})
    assert resp.headers["content-type"].startswith("text/markdown")
    post = frontmatter.loads(resp.text)
    assert 0.0 < post["outage"] < 1.0


def test_wants_json():
    assert wants_json(_request("application/json"))
    assert not wants_json(_request("text/markdown"))
    assert not wants_json(_request())


def test_render_response_keeps_infinity_readable():
    resp = render_response(_request("application/json"), {"t_max": math.inf})
    assert json.loads(resp.body) == {"t_max": "inf"}


def test_render_response_message_becomes_markdown_body():
    resp = render_response(_request(), {"message": "all clear", "winner": "df"})
    post = frontmatter.loads(resp.body.decode())
    assert post.content == "all clear"
    assert post["winner"] == "df"
