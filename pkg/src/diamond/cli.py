"""Command-line front end: keygen, send, recv, bench, energy, vectors.

Exit codes for recv: 0 success, 2 authentication reject, 3 desync,
4 malformed frame or structural mismatch, 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import socket
import struct
import sys
import time

from . import bench, faae, famac, primitives, session
from .bench import EnergyModel, Phase
from .errors import (AuthenticationError, ConfigurationError, DesyncError,
                     DiamondError, MalformedFrameError, StructuralError)
from .faae import AggMode, SchemeConfig, SchemeId, SecretMaterial, make_config
from .session import KEYFILE_MAGIC, Receiver, Sender, decode_envelope, encode_envelope
from .util import make_rng

_KEYFILE_HEADER = struct.Struct(">4sBBQII")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECT = 2
EXIT_DESYNC = 3
EXIT_MALFORMED = 4

_AGG_NAMES = {"hash": AggMode.HASH, "xor": AggMode.XOR, "addq": AggMode.ADD_Q}


def write_keyfile(path: str, config: SchemeConfig, material: SecretMaterial) -> bytes:
    blob = _KEYFILE_HEADER.pack(KEYFILE_MAGIC, int(config.scheme_id),
                                int(config.agg_mode), config.n, config.b,
                                config.msg_len) + material.to_bytes(config)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, blob)
    finally:
        os.close(fd)
    return hashlib.sha256(blob).digest()


def read_keyfile(path: str) -> tuple[SchemeConfig, SecretMaterial]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _KEYFILE_HEADER.size or blob[:4] != KEYFILE_MAGIC:
        raise ConfigurationError(f"{path} is not a key file")
    magic, scheme, agg, n, b, msg_len = _KEYFILE_HEADER.unpack(
        blob[:_KEYFILE_HEADER.size])
    config = SchemeConfig(SchemeId(scheme), n, b, msg_len, AggMode(agg))
    material = SecretMaterial.from_bytes(config, blob[_KEYFILE_HEADER.size:])
    return config, material


# ---------------------------------------------------------------------------
# Record I/O
# ---------------------------------------------------------------------------

def _read_records(stream, fmt: str):
    if fmt == "lines":
        for line in stream.read().split(b"\n"):
            if line:
                yield line
    else:  # length-prefixed
        data = stream.read()
        off = 0
        while off < len(data):
            if off + 4 > len(data):
                raise MalformedFrameError("truncated record length", offset=off)
            (ln,) = struct.unpack(">I", data[off:off + 4])
            off += 4
            if off + ln > len(data):
                raise MalformedFrameError("truncated record body", offset=off)
            yield data[off:off + ln]
            off += ln


def _write_record(stream, record: bytes, fmt: str) -> None:
    if fmt == "lines":
        stream.write(record + b"\n")
    else:
        stream.write(struct.pack(">I", len(record)) + record)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_keygen(args) -> int:
    config = make_config(args.scheme, n=args.n, b=args.b, msg_len=args.msg_len,
                         agg_mode=_AGG_NAMES[args.agg] if args.agg else None)
    material = SecretMaterial.generate(config, make_rng())
    fingerprint = write_keyfile(args.out, config, material)
    material.wipe()
    print(f"wrote {args.out} scheme={config.scheme_id.wire_name} n={config.n} "
          f"b={config.b} msg_len={config.msg_len} "
          f"fingerprint={fingerprint.hex()[:32]}")
    return EXIT_OK


def cmd_send(args) -> int:
    config, material = read_keyfile(args.key)
    sender = Sender(config, material, make_rng(),
                    precompute_depth=args.precompute_depth)

    if args.connect:
        host, port = args.connect.rsplit(":", 1)
        sock = socket.create_connection((host, int(port)))
        out = sock.makefile("wb")
    else:
        sock = None
        out = open(args.out, "wb") if args.out != "-" else sys.stdout.buffer

    instream = open(args.infile, "rb") if args.infile != "-" else sys.stdin.buffer
    try:
        out.write(sender.hello())
        for record in _read_records(instream, args.format):
            env = sender.step(record)
            if env is not None:
                out.write(encode_envelope(env))
        env = sender.flush()
        if env is not None:
            out.write(encode_envelope(env))
        out.flush()
    finally:
        if instream is not sys.stdin.buffer:
            instream.close()
        if out is not sys.stdout.buffer:
            out.close()
        if sock is not None:
            sock.close()
    return EXIT_OK


def cmd_recv(args) -> int:
    config, material = read_keyfile(args.key)
    receiver = Receiver(config, material)
    outstream = open(args.out, "wb") if args.out != "-" else sys.stdout.buffer

    if args.listen:
        host, port = args.listen.rsplit(":", 1)
        srv = socket.create_server((host, int(port)))
        conn, _ = srv.accept()
        instream = conn.makefile("rb")
        closers = [instream, conn, srv]
    else:
        instream = open(args.infile, "rb")
        closers = [instream]

    try:
        frames = session.read_frames(instream)
        for i, frame in enumerate(frames):
            if i == 0:
                receiver.on_hello(frame)
                continue
            for record in receiver.step(decode_envelope(frame)):
                _write_record(outstream, record, args.format)
        outstream.flush()
    except AuthenticationError as exc:
        print(f"reject: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except DesyncError as exc:
        print(f"desync: {exc}", file=sys.stderr)
        return EXIT_DESYNC
    except (MalformedFrameError, StructuralError) as exc:
        print(f"malformed: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    finally:
        for c in closers:
            c.close()
        if outstream is not sys.stdout.buffer:
            outstream.close()
    return EXIT_OK


def _parse_list(raw: str, cast):
    return tuple(cast(tok) for tok in raw.split(",") if tok)


def cmd_bench(args) -> int:
    schemes = (tuple(SchemeId.from_name(s) for s in args.schemes.split(","))
               if args.schemes else tuple(SchemeId))
    msg_lens = _parse_list(args.msg_lens, int) if args.msg_lens else bench.DEFAULT_MSG_LENS
    batches = _parse_list(args.batches, int) if args.batches else bench.DEFAULT_BATCHES
    phases = (tuple(Phase[p.strip().upper()] for p in args.phases.split(","))
              if args.phases else tuple(Phase))
    records = bench.run_grid(schemes=schemes, msg_lens=msg_lens, batches=batches,
                             runs=args.runs, ops=args.ops,
                             depth=args.precompute_depth, phases=phases)
    csv = bench.to_csv(records)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def _host_cpu_hz() -> float:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("cpu mhz"):
                    return float(line.split(":")[1]) * 1e6
    except (OSError, ValueError, IndexError):
        pass
    return 1e9  # nominal fallback when the host frequency is unreadable


def cmd_energy(args) -> int:
    model = EnergyModel(cpu_hz=args.cpu_hz if args.cpu_hz else _host_cpu_hz(),
                        e_cpu_nj=args.e_cpu_nj, e_tx_uj_per_bit=args.e_tx_uj)
    rows: list[tuple[str, float, int]] = []  # (phase, cycles, wire_bytes)

    if args.cycles is not None:
        rows.append(("cpu", args.cycles, 0))
        rows.append(("transmission", 0.0, args.wire_bytes))
    else:
        config = make_config(args.scheme, n=max(args.ops, args.batch),
                             b=args.batch, msg_len=args.msg_len)
        splits = _measure_energy_phases(config, args.ops)
        wire = args.wire_bytes if args.wire_bytes else (
            config.msg_len + (20 + config.tag_len(config.b)) / config.b)
        for name, seconds in splits:
            rows.append((name, model.cycles_for(seconds), 0))
        rows.append(("transmission", 0.0, int(round(wire))))

    print(f"# cpu_hz={model.cpu_hz:.6e} e_cpu={model.e_cpu_nj}nJ/cycle "
          f"e_tx={model.e_tx_uj_per_bit}uJ/bit")
    print("phase,cycles,wire_bytes,energy_joules")
    total = 0.0
    for name, cycles, wire_bytes in rows:
        joules = model.total_joules(cycles, wire_bytes)
        total += joules
        print(f"{name},{cycles:.6e},{wire_bytes},{joules:.9e}")
    print(f"total,,,{total:.9e}")
    return EXIT_OK


def _measure_energy_phases(config: SchemeConfig, ops: int):
    """Per-message wall time of the online path and the offline halves."""
    from . import fse as fse_mod
    rng = make_rng("energy")
    material = SecretMaterial.generate(config, rng)
    state = faae.keygen_from_material(config, material, ctr=2 ** 64)
    message = bytes(config.msg_len)
    clock = time.perf_counter
    t_fse = t_mac = t_on = 0.0
    done = 0
    while done < ops:
        chunk = min(config.b, config.n - state.period + 1, ops - done)
        if chunk < 1:
            break
        if config.integrated:
            t0 = clock()
            packets = faae.precompute(state, chunk)
            t1 = clock()
            t_fse += t1 - t0
        else:
            t0 = clock()
            blocks = fse_mod.enc_offline_batch(state.fse, chunk)
            t1 = clock()
            tags = famac.sign_offline_batch(state.famac, chunk)
            t2 = clock()
            t_fse += t1 - t0
            t_mac += t2 - t1
            packets = [faae.OfflinePacket(b.period, b, t)
                       for b, t in zip(blocks, tags)]
        t0 = clock()
        for pkt in packets:
            faae.authenc_online(state, message, pkt)
        t_on += clock() - t0
        done += chunk
    return [("online", t_on / done), ("offline_fse", t_fse / done),
            ("offline_famac", t_mac / done)]


def cmd_vectors(args) -> int:
    from . import _chacha, gcm

    aes_key = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
    aes_in = bytes.fromhex("00112233445566778899aabbccddeeff")
    chacha_key = bytes(range(32))
    chacha_ctr = (int.from_bytes(bytes.fromhex("000000090000004a00000000"), "big") << 32) | 1

    seed = bytearray(16)
    st = primitives.FprgState(seed, max_periods=4)
    chain = []
    for _ in range(3):
        _, k = primitives.fprg_update(st)
        chain.append(bytes(k).hex())

    out = {
        "aes128": {
            "key": aes_key.hex(), "input": aes_in.hex(),
            "output": primitives.prf_eval(primitives.PRF_AES128, aes_key, aes_in).hex(),
        },
        "sha256": {
            "empty": primitives.hash_eval(b"").hex(),
            "abc": primitives.hash_eval(b"abc").hex(),
        },
        "chacha20_block": {
            "key": chacha_key.hex(),
            "counter": f"{chacha_ctr:032x}",
            "output": _chacha.block_at(chacha_key, chacha_ctr).hex(),
        },
        "ghash": {
            "key": (b"\x42" * 16).hex(), "message": (b"\x01" * 16).hex(),
            "output": primitives.uh_eval(primitives.UH_GHASH, b"\x42" * 16,
                                         b"\x01" * 16).hex(),
        },
        "poly1305_uh": {
            "key_clamped": bytes(primitives.poly1305_clamp(b"\x85" * 16)).hex(),
            "message": b"cheese".hex(),
            "output": primitives.uh_eval(
                primitives.UH_POLY1305,
                bytes(primitives.poly1305_clamp(b"\x85" * 16)), b"cheese").hex(),
        },
        "aes128_gcm": {
            "key": aes_key.hex(), "nonce": (b"\x00" * 12).hex(),
            "message": (b"\xaa" * 16).hex(),
            "ciphertext_tag": gcm.encrypt(aes_key, b"\x00" * 12, b"\xaa" * 16).hex(),
        },
        "key_chain_from_zero_seed": chain,
    }
    json.dump(out, sys.stdout, indent=2)
    print()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diamond",
        description="Forward-secure aggregate authenticated encryption for telemetry")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a pre-shared key file")
    p.add_argument("--scheme", required=True,
                   choices=[s.wire_name for s in SchemeId])
    p.add_argument("--n", type=int, required=True, help="lifetime in messages")
    p.add_argument("--b", type=int, required=True, help="epoch (batch) size")
    p.add_argument("--msg-len", type=int, required=True, help="fixed message length")
    p.add_argument("--agg", choices=sorted(_AGG_NAMES), default=None,
                   help="aggregation mode (default: scheme default, xor)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("send", help="encrypt records from a file or stdin")
    p.add_argument("--key", required=True)
    p.add_argument("--in", dest="infile", default="-")
    p.add_argument("--format", choices=["lines", "lp"], default="lines")
    p.add_argument("--out", default="-", help="frame file ('-' for stdout)")
    p.add_argument("--connect", default=None, help="host:port TCP transport")
    p.add_argument("--precompute-depth", type=int, default=0)
    p.set_defaults(func=cmd_send)

    p = sub.add_parser("recv", help="verify and decrypt a frame stream")
    p.add_argument("--key", required=True)
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--listen", default=None, help="host:port TCP transport")
    p.add_argument("--format", choices=["lines", "lp"], default="lines")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_recv)

    p = sub.add_parser("bench", help="timing/storage grid as CSV")
    p.add_argument("--schemes", default=None, help="comma list (default: all)")
    p.add_argument("--msg-lens", default=None, help="comma list (default: 16,64,128)")
    p.add_argument("--batches", default=None, help="comma list (default: 1..1024)")
    p.add_argument("--phases", default=None,
                   help="comma list of OFFLINE,ONLINE,TOTAL,AVERDEC_ONLINE,E2E")
    p.add_argument("--runs", type=int, default=bench.DEFAULT_RUNS)
    p.add_argument("--ops", type=int, default=bench.DEFAULT_OPS)
    p.add_argument("--precompute-depth", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("energy", help="sensor-node energy estimate")
    p.add_argument("--cycles", type=float, default=None,
                   help="CPU cycles (skips measurement)")
    p.add_argument("--wire-bytes", type=int, default=0)
    p.add_argument("--cpu-hz", type=float, default=None,
                   help="clock for cycle conversion (e.g. 16e6)")
    p.add_argument("--e-cpu-nj", type=float, default=bench.E_CPU_NJ_PER_CYCLE,
                   help="nJ per CPU cycle")
    p.add_argument("--e-tx-uj", type=float, default=bench.E_TX_UJ_PER_BIT,
                   help="uJ per transmitted bit")
    p.add_argument("--scheme", default="diamond1")
    p.add_argument("--msg-len", type=int, default=16)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--ops", type=int, default=256)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("vectors", help="dump canonical test vectors as JSON")
    p.set_defaults(func=cmd_vectors)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except DiamondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
