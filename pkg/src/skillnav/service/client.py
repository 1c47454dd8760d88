"""Synchronous clients for the service: in-process ASGI or remote HTTP.

The in-process client runs the app directly through ASGI, no socket or
server process involved, so the CLI works offline by default while
staying a genuine HTTP client in shape.
"""

from __future__ import annotations

import asyncio

import httpx


class LocalClient:
    """Blocking facade over the ASGI app; one event loop per request."""

    def __init__(self, app):
        self._app = app

    def request(self, method: str, url: str, **kwargs) -> httpx.Response:
        async def _go() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport, base_url="http://service") as c:
                return await c.request(method, url, **kwargs)

        return asyncio.run(_go())

    def get(self, url: str, **kwargs) -> httpx.Response:
        return self.request("GET", url, **kwargs)

    def post(self, url: str, **kwargs) -> httpx.Response:
        return self.request("POST", url, **kwargs)

    def close(self) -> None:
        pass


def make_client(server: str | None = None):
    """Remote httpx client when a server URL is given, else in-process."""
    if server is not None:
        return httpx.Client(base_url=server, timeout=600.0)
    from skillnav.service.app import app

    return LocalClient(app)
