"""HTTP and WebSocket front end for a live debug session.

The app wraps one Session. Configuration endpoints work until the run is
started; after that a background task pulls events and fans them out to
every websocket client in arrival order, so all clients see the same
sequence.
"""

from __future__ import annotations

import asyncio
import threading
from contextlib import asynccontextmanager, suppress
from typing import Dict, List, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .host import Event, NoSuchModule, Session, TriggerSpec, TypeMismatch


def event_to_dict(event: Event) -> Dict:
    return {"module": event.module, "payload": event.payload,
            "timestamp": event.timestamp, "type": event.kind}


def create_app(session: Session, console_dir: Optional[str] = None) -> FastAPI:
    events: List[Dict] = []
    state = {"phase": "config", "eof": False}
    cond = asyncio.Condition()
    # serializes session use by config endpoints before the run starts
    session_lock = threading.Lock()

    async def pull_events() -> None:
        loop = asyncio.get_running_loop()
        while True:
            event = await loop.run_in_executor(None, session.next_event)
            async with cond:
                if event is None:
                    state["eof"] = True
                    cond.notify_all()
                    return
                events.append(event_to_dict(event))
                cond.notify_all()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        task = app.state.pull_task
        if task is not None:
            task.cancel()
            with suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="debug console backend", lifespan=lifespan)
    app.state.pull_task = None

    def config_guard():
        if state["phase"] != "config":
            return JSONResponse({"error": "run already started"},
                                status_code=409)
        return None

    @app.get("/api/modules")
    def api_modules():
        with session_lock:
            infos = session.modules or session.enumerate_modules()
        return [{"module_id": m.module_id, "type": m.type_name,
                 "version": m.version, "attach": m.attach} for m in infos]

    @app.post("/api/triggers")
    def api_triggers(body: Dict):
        guard = config_guard()
        if guard is not None:
            return guard
        try:
            spec = TriggerSpec(
                module=body["module"], condition=body["condition"],
                argument=body["argument"],
                action=body.get("action", "collect_on"),
                scope=body.get("scope", "local"))
        except KeyError as exc:
            return JSONResponse({"error": "missing field %s" % exc},
                                status_code=400)
        try:
            with session_lock:
                session.set_trigger(spec)
        except NoSuchModule as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        except (TypeMismatch, ValueError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return {"status": "armed", "module": spec.module}

    @app.post("/api/collection")
    def api_collection(body: Dict):
        guard = config_guard()
        if guard is not None:
            return guard
        try:
            module, enabled = body["module"], bool(body["enabled"])
        except KeyError as exc:
            return JSONResponse({"error": "missing field %s" % exc},
                                status_code=400)
        try:
            with session_lock:
                session.set_collection(module, enabled)
        except NoSuchModule as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        return {"status": "ok", "module": module, "enabled": enabled}

    @app.post("/api/run")
    async def api_run():
        if state["phase"] != "config":
            return JSONResponse({"error": "run already started"},
                                status_code=409)
        with session_lock:
            session.start_run()
        state["phase"] = "running"
        app.state.pull_task = asyncio.create_task(pull_events())
        return {"status": "running"}

    @app.get("/api/events")
    async def api_events(since: int = 0):
        return {"events": events[since:], "next": len(events),
                "eof": state["eof"]}

    @app.websocket("/ws/events")
    async def ws_events(ws: WebSocket):
        await ws.accept()
        idx = 0
        try:
            while True:
                async with cond:
                    await cond.wait_for(
                        lambda: len(events) > idx or state["eof"])
                    chunk = list(events[idx:])
                    eof = state["eof"]
                for item in chunk:
                    await ws.send_json(item)
                idx += len(chunk)
                if eof and idx == len(events):
                    await ws.close()
                    return
        except WebSocketDisconnect:
            return

    if console_dir is not None:
        # API routes above win; everything else serves the built console
        app.mount("/", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app
