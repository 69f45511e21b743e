"""Operator entry point: vitalink {keygen,credgen,serve,device,proxy}.

Exit codes: 0 success, 1 runtime/protocol failure, 2 configuration or
usage error. Structured key=value logs go to stderr; data to stdout.
"""

from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import threading
import time
from pathlib import Path

from . import curves, keyfiles
from . import credentials as creds
from .credentials import Role
from .curves import SUITE_NAMES
from .endpoints import DeviceConfig, ServerConfig, run_device, run_server
from .errors import InvalidCredentialFields
from .proxy import MODES, TamperPlan, proxy_run
from .telemetry import AnomalyConfig

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _suite(name: str):
    try:
        return SUITE_NAMES[name]
    except KeyError:
        raise UsageError(f"unknown suite {name!r}; choose from {sorted(SUITE_NAMES)}")


def _require_file(path: str, flag: str) -> str:
    if not Path(path).is_file():
        raise UsageError(f"{flag}: no such file: {path}")
    return path


def _rng(seed):
    return keyfiles.drbg(seed) if seed is not None else os.urandom


def cmd_keygen(args) -> int:
    suite = _suite(args.suite)
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"--out: not a writable directory: {out}")
    d, Q = curves.keypair_gen(suite, _rng(args.seed))
    keyfiles.write_private_key(out / "key.vlk", d, suite)
    keyfiles.write_public_point(out / "key.vlp", Q, suite)
    print(f"fingerprint={keyfiles.fingerprint(Q, suite)}")
    return EXIT_OK


def cmd_credgen(args) -> int:
    suite = _suite(args.suite)
    issuer_key = keyfiles.read_private_key(
        _require_file(args.issuer_key, "--issuer-key"), suite
    )
    pub = keyfiles.read_public_point(_require_file(args.pub, "--pub"), suite)
    role_names = {"device": Role.DEVICE, "server": Role.SERVER, "issuer": Role.ISSUER}
    if args.role not in role_names:
        raise UsageError(f"--role must be one of {sorted(role_names)}")
    subject = creds.encode_subject(args.subject)
    if args.issuer_cred:
        issuer_id = keyfiles.read_credential(
            _require_file(args.issuer_cred, "--issuer-cred"), suite
        ).subject_id
    else:
        issuer_id = subject  # self-signed
    now = int(time.time())
    try:
        cred = creds.credential_issue(
            issuer_key,
            subject,
            role_names[args.role],
            pub,
            now,
            now + args.valid_days * 86400,
            issuer_id,
            suite,
            _rng(args.seed),
        )
    except InvalidCredentialFields as exc:
        raise UsageError(str(exc))
    keyfiles.write_credential(args.out, cred, suite)
    print(f"credential={args.out} subject={args.subject} role={args.role}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = ServerConfig(
        listen_host=args.listen.rsplit(":", 1)[0],
        listen_port=int(args.listen.rsplit(":", 1)[1]),
        key_path=_require_file(args.key, "--key"),
        cred_path=_require_file(args.cred, "--cred"),
        root_path=_require_file(args.root, "--root"),
        store_dir=args.store_dir,
        anomaly=AnomalyConfig(
            low=args.hr_low, high=args.hr_high, consecutive=args.hr_consecutive
        ),
    )
    shutdown = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: shutdown.set())
    signal.signal(signal.SIGTERM, lambda *_: shutdown.set())
    run_server(cfg, shutdown)
    return EXIT_OK


def cmd_device(args) -> int:
    host, port = args.connect.rsplit(":", 1)
    cfg = DeviceConfig(
        server_host=host,
        server_port=int(port),
        key_path=_require_file(args.key, "--key"),
        cred_path=_require_file(args.cred, "--cred"),
        root_path=_require_file(args.root, "--root"),
        suite=_suite(args.suite),
        interval_ms=args.interval_ms,
        count=args.count,
        seed=args.seed,
        anomaly_script=args.anomaly_script,
        realtime=args.realtime,
    )
    if cfg.anomaly_script:
        _require_file(cfg.anomaly_script, "--anomaly-script")
    try:
        report = run_device(cfg)
    except ValueError as exc:
        raise UsageError(str(exc))
    print(
        f"sent_count={report.sent_count} session_id={report.session_id} "
        f"duration_s={report.duration_s:.3f} "
        f"error={report.error or 'none'}"
    )
    return EXIT_OK if report.error is None else EXIT_RUNTIME


def cmd_proxy(args) -> int:
    lhost, lport = args.listen.rsplit(":", 1)
    uhost, uport = args.upstream.rsplit(":", 1)
    plan = TamperPlan(
        mode=args.mode,
        target_index=args.target_index,
        direction=args.direction,
        bit_offset=args.bit_offset,
    )
    shutdown = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: shutdown.set())
    signal.signal(signal.SIGTERM, lambda *_: shutdown.set())
    proxy_run(lhost, int(lport), uhost, int(uport), plan, shutdown)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vitalink")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a static keypair")
    p.add_argument("--suite", default="p256")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("credgen", help="issue a signed credential")
    p.add_argument("--suite", default="p256")
    p.add_argument("--issuer-key", required=True)
    p.add_argument("--issuer-cred", default=None,
                   help="issuer credential; omit for self-signed")
    p.add_argument("--subject", required=True)
    p.add_argument("--role", required=True)
    p.add_argument("--pub", required=True)
    p.add_argument("--valid-days", type=int, default=365)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_credgen)

    p = sub.add_parser("serve", help="run the ingestion server")
    p.add_argument("--listen", default="127.0.0.1:7700")
    p.add_argument("--key", required=True)
    p.add_argument("--cred", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--store-dir", default="store")
    p.add_argument("--hr-low", type=int, default=40)
    p.add_argument("--hr-high", type=int, default=150)
    p.add_argument("--hr-consecutive", type=int, default=3)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("device", help="run the simulated wearable")
    p.add_argument("--connect", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--cred", required=True)
    p.add_argument("--root", required=True)
    p.add_argument("--suite", default="p256")
    p.add_argument("--interval-ms", type=int, default=1000)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--anomaly-script", default=None)
    p.add_argument("--realtime", action="store_true",
                   help="sleep the sample interval between readings")
    p.set_defaults(func=cmd_device)

    p = sub.add_parser("proxy", help="run the tamper proxy")
    p.add_argument("--listen", required=True)
    p.add_argument("--upstream", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--target-index", type=int, default=0)
    p.add_argument("--direction", choices=("c2s", "s2c"), default="c2s")
    p.add_argument("--bit-offset", type=int, default=0)
    p.set_defaults(func=cmd_proxy)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("VITALINK_LOG", "INFO").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
