"""FastAPI application: batch pipeline endpoints plus the live WebSocket
session protocol. All state lives per-request or per-connection; a fixed
seed reproduces any run bit-for-bit."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

import dreamdrive
from dreamdrive import datalog, planner, training
from dreamdrive.errors import DreamDriveError
from dreamdrive.models import build_models, load_checkpoint
from dreamdrive.numerics import Hyperparams, gradient_check_all
from dreamdrive.planner import LearnedModel
from dreamdrive.roadworld import Action
from dreamdrive.service import schemas
from dreamdrive.service.sessions import PlannerAttachment, Session, parse_client_message


@dataclass
class ServiceSettings:
    log_dir: str = "sessions"
    gen_checkpoint: str | None = None
    cls_checkpoint: str | None = None
    depth: int = 3
    frontend_dir: str | None = None


def _load_nets(settings: ServiceSettings):
    gen = cls = None
    if settings.gen_checkpoint:
        gen, _, _ = build_models(0)
        load_checkpoint(settings.gen_checkpoint, gen)
    if settings.cls_checkpoint:
        _, _, cls = build_models(0)
        load_checkpoint(settings.cls_checkpoint, cls)
    return gen, cls


def _echo_config(request, path: Path) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(request.model_dump_json(indent=2) + "\n")
    return str(path)


def _require_file(path: str) -> None:
    if not Path(path).is_file():
        raise HTTPException(status_code=404, detail=f"file not found: {path}")


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    app = FastAPI(title="dreamdrive", version=dreamdrive.__version__)
    gen_net, cls_net = _load_nets(settings)
    session_counter = itertools.count()

    @app.exception_handler(DreamDriveError)
    async def _domain_error(_, exc: DreamDriveError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=dreamdrive.__version__,
                                      gen_loaded=gen_net is not None,
                                      cls_loaded=cls_net is not None)

    @app.post("/api/collect", response_model=schemas.CollectResponse)
    def collect(req: schemas.CollectRequest):
        out = Path(req.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        report = datalog.collect(req.seed, req.steps, out, policy=req.policy)
        return schemas.CollectResponse(
            path=report.path,
            records=report.records,
            class_counts={Action.name(a): report.class_counts[a] for a in Action.ALL},
            crashes=report.crashes,
            sessions=report.sessions,
            config_path=_echo_config(req, out.with_suffix(out.suffix + ".config.json")),
        )

    @app.post("/api/train-gan", response_model=schemas.TrainGanResponse)
    def train_gan(req: schemas.TrainGanRequest):
        _require_file(req.data)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        transitions = list(datalog.read_dataset(req.data))
        hp = Hyperparams(learning_rate=req.learning_rate, batch_size=req.batch_size,
                         l1_weight=req.l1_weight, epochs=req.epochs, seed=req.seed)
        gen, disc, _ = build_models(req.seed, hp, shared_trunk=req.shared_trunk)
        report = training.train_gan(transitions, gen, disc, hp, out_dir=out_dir)
        training.emit_loss_csv(report, out_dir / "loss.csv")
        return schemas.TrainGanResponse(
            epochs=len(report.records),
            d_loss=report.final["d_loss"],
            g_adv=report.final["g_adv"],
            g_l1=report.final["g_l1"],
            wall_seconds=report.wall_seconds,
            gen_last=str(out_dir / "gen-last.sadw"),
            gen_best=str(out_dir / "gen-best.sadw"),
            disc_last=str(out_dir / "disc-last.sadw"),
            disc_best=str(out_dir / "disc-best.sadw"),
            loss_csv=str(out_dir / "loss.csv"),
            config_path=_echo_config(req, out_dir / "config.json"),
        )

    @app.post("/api/train-cls", response_model=schemas.TrainClassifierResponse)
    def train_cls(req: schemas.TrainClassifierRequest):
        _require_file(req.data)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        transitions = list(datalog.read_dataset(req.data))
        if not req.include_crashes:
            transitions = datalog.filter_safe(transitions)
        train_set, test_set = datalog.balance_split(
            transitions, req.per_class, req.test_fraction, req.seed)
        hp = Hyperparams(learning_rate=req.learning_rate, batch_size=req.batch_size,
                         epochs=req.epochs, seed=req.seed)
        _, _, cls = build_models(req.seed, hp)
        report = training.train_classifier(train_set, cls, hp, out_dir=out_dir)
        training.emit_loss_csv(report, out_dir / "loss.csv")
        test_split = out_dir / "test.sadg"
        datalog.write_dataset(test_split, test_set)
        test_accuracy = confusion = None
        if test_set:
            ev = training.eval_classifier(test_set, cls)
            test_accuracy = ev.accuracy
            confusion = ev.confusion.tolist()
        return schemas.TrainClassifierResponse(
            train_size=len(train_set),
            test_size=len(test_set),
            cls_loss=report.final["cls_loss"],
            cls_train_acc=report.final["cls_train_acc"],
            test_accuracy=test_accuracy,
            confusion=confusion,
            wall_seconds=report.wall_seconds,
            cls_last=str(out_dir / "cls-last.sadw"),
            cls_best=str(out_dir / "cls-best.sadw"),
            loss_csv=str(out_dir / "loss.csv"),
            test_split=str(test_split),
            config_path=_echo_config(req, out_dir / "config.json"),
        )

    @app.post("/api/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        _require_file(req.data)
        transitions = list(datalog.read_dataset(req.data))
        if req.limit:
            transitions = transitions[: req.limit]
        if not transitions:
            raise HTTPException(status_code=400, detail="dataset is empty")
        cls_metrics = gen_metrics = None
        if req.cls:
            _require_file(req.cls)
            _, _, cls = build_models(0)
            load_checkpoint(req.cls, cls)
            ev = training.eval_classifier(transitions, cls)
            cls_metrics = schemas.ClassifierMetrics(accuracy=ev.accuracy,
                                                    confusion=ev.confusion.tolist())
        if req.gen:
            _require_file(req.gen)
            gen, _, _ = build_models(0)
            load_checkpoint(req.gen, gen)
            ev = training.eval_generator(transitions, gen)
            gen_metrics = schemas.GeneratorMetrics(
                mae=ev.mae, identity_baseline_mae=ev.identity_baseline_mae,
                per_action_mae=ev.per_action_mae)
        return schemas.EvalResponse(records=len(transitions),
                                    classifier=cls_metrics, generator=gen_metrics)

    @app.post("/api/drive", response_model=schemas.DriveResponse)
    def drive(req: schemas.DriveRequest):
        gen = cls = None
        if not req.oracle:
            if not (req.gen and req.cls):
                raise HTTPException(
                    status_code=400,
                    detail="learned-mode driving needs --gen and --cls checkpoints")
            _require_file(req.gen)
            _require_file(req.cls)
            gen, _, _ = build_models(0)
            load_checkpoint(req.gen, gen)
            _, _, cls = build_models(0)
            load_checkpoint(req.cls, cls)
        report = planner.drive(req.seed, req.steps, req.depth, gen=gen, cls=cls,
                               oracle=req.oracle)
        csv_path = config_path = None
        if req.out:
            out = Path(req.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            report.to_csv(out)
            csv_path = str(out)
            config_path = _echo_config(req, out.with_suffix(out.suffix + ".config.json"))
        return schemas.DriveResponse(
            survived=report.survived, steps_requested=report.steps_requested,
            crashed=report.crashed, crash_cause=report.crash_cause,
            no_safe_steps=report.no_safe_steps, csv_path=csv_path, config_path=config_path)

    @app.post("/api/gradcheck", response_model=schemas.GradcheckResponse)
    def gradcheck():
        checks = [schemas.GradcheckEntry(name=r.name, max_rel_err=r.max_rel_err,
                                         tolerance=r.tolerance, passed=r.passed)
                  for r in gradient_check_all()]
        return schemas.GradcheckResponse(passed=all(c.passed for c in checks), checks=checks)

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        attachment = None
        if gen_net is not None and cls_net is not None:
            attachment = PlannerAttachment(LearnedModel(gen_net, cls_net), settings.depth)
        session: Session | None = None

        async def send(payload: dict):
            await ws.send_text(json.dumps(payload))

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    message = json.loads(raw)
                    kind, fields = parse_client_message(message)
                except (json.JSONDecodeError, ValueError) as exc:
                    await send({"type": "error", "message": str(exc)})
                    continue

                if kind == "start":
                    if session is not None and session.alive:
                        await send({"type": "error",
                                    "message": "session already running; send stop first"})
                        continue
                    ordinal = next(session_counter)
                    log_path = Path(settings.log_dir) / f"session-{fields['seed']}-{ordinal}.sadg"
                    session = Session(fields["seed"], fields["record"], log_path,
                                      planner=attachment)
                    await send(session.frame_message())
                elif kind == "action":
                    if session is None:
                        await send({"type": "error", "message": "no session started"})
                        continue
                    if not session.alive:
                        await send(session.over_message())
                        continue
                    if fields["step"] != session.step:
                        await send({"type": "error",
                                    "message": f"stale step {fields['step']}, "
                                               f"expected {session.step}"})
                        continue
                    frame_msg, over = session.apply_action(fields["action"])
                    await send(frame_msg)
                    if over:
                        await send(session.over_message())
                elif kind == "stop":
                    if session is None:
                        await send({"type": "error", "message": "no session started"})
                        continue
                    await send(session.over_message())
                    session = None
        except WebSocketDisconnect:
            if session is not None:
                session.flush()

    frontend = settings.frontend_dir
    if frontend and Path(frontend).is_dir():
        app.mount("/", StaticFiles(directory=frontend, html=True), name="ui")

    return app
