"""Command-line entry point. Every subcommand is a thin client of the HTTP
service: flags become a request model, the response is printed. By default
the service runs in-process; --server targets a running instance instead.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

from dreamdrive.roadworld import Action
from dreamdrive.service.app import ServiceSettings, create_app

USAGE_ERROR = 2
CHECK_FAILED = 1


def call_api(server: str | None, path: str, payload: dict | None) -> tuple[int, dict]:
    """POST a request model to a remote server or an in-process app."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
            return resp.status_code, resp.json()

    async def run():
        transport = httpx.ASGITransport(app=create_app(ServiceSettings()))
        async with httpx.AsyncClient(transport=transport, base_url="http://dreamdrive",
                                     timeout=None) as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(run())


def require_files(*paths: str | None) -> None:
    for p in paths:
        if p and not Path(p).is_file():
            print(f"error: file not found: {p}", file=sys.stderr)
            raise SystemExit(USAGE_ERROR)


def report_failure(status: int, body: dict) -> int:
    print(f"error: {body.get('detail', body)}", file=sys.stderr)
    return CHECK_FAILED


def cmd_collect(args) -> int:
    status, body = call_api(args.server, "/api/collect", {
        "seed": args.seed, "steps": args.steps, "out": args.out, "policy": args.policy})
    if status != 200:
        return report_failure(status, body)
    counts = body["class_counts"]
    print(f"wrote {body['records']} transitions to {body['path']}")
    print(f"  left={counts['left']} up={counts['up']} right={counts['right']} "
          f"crashes={body['crashes']} sessions={body['sessions']}")
    print(f"  config echo: {body['config_path']}")
    return 0


def cmd_train_gan(args) -> int:
    require_files(args.data)
    status, body = call_api(args.server, "/api/train-gan", {
        "data": args.data, "out_dir": args.out, "epochs": args.epochs, "seed": args.seed,
        "l1_weight": args.l1, "learning_rate": args.lr, "batch_size": args.batch_size,
        "shared_trunk": args.shared_trunk})
    if status != 200:
        return report_failure(status, body)
    print(f"trained {body['epochs']} epochs in {body['wall_seconds']:.1f}s")
    print(f"  final d_loss={body['d_loss']:.4f} g_adv={body['g_adv']:.4f} "
          f"g_l1={body['g_l1']:.4f}")
    print(f"  checkpoints: {body['gen_last']}, {body['gen_best']}")
    print(f"  loss csv: {body['loss_csv']}")
    return 0


def cmd_train_cls(args) -> int:
    require_files(args.data)
    status, body = call_api(args.server, "/api/train-cls", {
        "data": args.data, "out_dir": args.out, "epochs": args.epochs,
        "per_class": args.per_class, "test_fraction": args.test_fraction,
        "seed": args.seed, "learning_rate": args.lr, "batch_size": args.batch_size})
    if status != 200:
        return report_failure(status, body)
    print(f"trained {args.epochs} epochs on {body['train_size']} records "
          f"in {body['wall_seconds']:.1f}s")
    print(f"  final loss={body['cls_loss']:.4f} train_acc={body['cls_train_acc']:.3f}")
    if body["test_accuracy"] is not None:
        print(f"  held-out accuracy={body['test_accuracy']:.3f} on {body['test_size']} records")
        _print_confusion(body["confusion"])
    print(f"  checkpoint: {body['cls_best']}  test split: {body['test_split']}")
    return 0


def _print_confusion(confusion) -> None:
    print("  confusion (rows = truth, cols = predicted):")
    print("            left     up  right")
    for a, row in zip(Action.NAMES, confusion):
        print(f"    {a:>5} " + " ".join(f"{v:6d}" for v in row))


def cmd_eval(args) -> int:
    require_files(args.data, args.gen, args.cls)
    status, body = call_api(args.server, "/api/eval", {
        "data": args.data, "gen": args.gen, "cls": args.cls, "limit": args.limit})
    if status != 200:
        return report_failure(status, body)
    print(f"evaluated {body['records']} records")
    if body["classifier"]:
        print(f"  classifier accuracy: {body['classifier']['accuracy']:.4f}")
        _print_confusion(body["classifier"]["confusion"])
    if body["generator"]:
        g = body["generator"]
        ratio = g["mae"] / g["identity_baseline_mae"] if g["identity_baseline_mae"] else float("inf")
        print(f"  generator mae: {g['mae']:.5f}  identity baseline: "
              f"{g['identity_baseline_mae']:.5f}  ratio: {ratio:.3f}")
        per = " ".join(f"{Action.NAMES[a]}={g['per_action_mae'][a]:.5f}" for a in Action.ALL)
        print(f"  per-action mae: {per}")
    return 0


def cmd_drive(args) -> int:
    if not args.oracle:
        require_files(args.gen, args.cls)
    status, body = call_api(args.server, "/api/drive", {
        "seed": args.seed, "steps": args.steps, "depth": args.depth,
        "gen": args.gen, "cls": args.cls, "oracle": args.oracle, "out": args.out})
    if status != 200:
        return report_failure(status, body)
    mode = "oracle" if args.oracle else "learned"
    print(f"{mode} drive: survived {body['survived']}/{body['steps_requested']} steps")
    if body["crashed"]:
        print(f"  crashed: {body['crash_cause']}")
    if body["no_safe_steps"]:
        print(f"  steps with no safe option: {body['no_safe_steps']}")
    if body["csv_path"]:
        print(f"  episode log: {body['csv_path']}")
    return 0


def cmd_gradcheck(args) -> int:
    status, body = call_api(args.server, "/api/gradcheck", {})
    if status != 200:
        return report_failure(status, body)
    print(f"{'layer':<22} {'max rel err':>12} {'tolerance':>10}  result")
    for check in body["checks"]:
        verdict = "pass" if check["passed"] else "FAIL"
        print(f"{check['name']:<22} {check['max_rel_err']:>12.3e} "
              f"{check['tolerance']:>10.0e}  {verdict}")
    if not body["passed"]:
        print("gradient check FAILED", file=sys.stderr)
        return CHECK_FAILED
    print("all gradients match finite differences")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    frontend = args.frontend
    if frontend is None and Path("frontend/index.html").is_file():
        frontend = "frontend"
    settings = ServiceSettings(log_dir=args.log_dir, gen_checkpoint=args.gen,
                               cls_checkpoint=args.cls, depth=args.depth,
                               frontend_dir=frontend)
    require_files(args.gen, args.cls)
    uvicorn.run(create_app(settings), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dreamdrive",
        description="Next-frame GAN + key-press classifier + safe-depth driver "
                    "on a toy road simulator")
    parser.add_argument("--server", default=None,
                        help="URL of a running service (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="record teacher transitions to a dataset file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", choices=["teacher"], default="teacher")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--gen", default=None, help="generator checkpoint for live advice")
    p.add_argument("--cls", default=None, help="classifier checkpoint for live advice")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--log-dir", default="sessions")
    p.add_argument("--frontend", default=None, help="directory with the browser UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("train-gan", help="train the generator/discriminator pair")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l1", type=float, default=10.0,
                   help="L1 anchor weight; 0 = pure adversarial")
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--shared-trunk", action="store_true")
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("train-cls", help="train the key-press classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train_cls)

    p = sub.add_parser("eval", help="evaluate checkpoints against a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--gen", default=None)
    p.add_argument("--cls", default=None)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("drive", help="closed-loop drive with the planner")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--gen", default=None)
    p.add_argument("--cls", default=None)
    p.add_argument("--oracle", action="store_true",
                   help="use true simulator dynamics instead of the networks")
    p.add_argument("--out", default=None, help="write the per-step episode CSV here")
    p.set_defaults(func=cmd_drive)

    p = sub.add_parser("gradcheck", help="verify every layer gradient numerically")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
