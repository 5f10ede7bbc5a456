#!/usr/bin/env python3
"""Minimal env-bridge client: plays one episode with a uniformly random agent.

    kdnsim serve --port 5555 &
    python3 tools/bridge_client.py --port 5555 --seed 7
"""

import argparse
import json
import random
import socket
import struct


class Bridge:
    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port))
        self.next_id = 1

    def _recv_exact(self, n):
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise ConnectionError("server closed the connection")
            buf += chunk
        return buf

    def request(self, kind, **payload):
        msg = dict(payload, kind=kind, id=self.next_id)
        self.next_id += 1
        body = json.dumps(msg, separators=(",", ":"), sort_keys=True).encode()
        self.sock.sendall(struct.pack(">I", len(body)) + body)
        (n,) = struct.unpack(">I", self._recv_exact(4))
        reply = json.loads(self._recv_exact(n))
        if reply["kind"] == "error":
            raise RuntimeError(reply["message"])
        return reply


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=5555)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    env = Bridge(args.host, args.port)
    spaces = env.request("hello", version="kdnsim/1")
    n_actions = spaces["action_space"]["n"]
    rng = random.Random(0)

    reset = {} if args.seed is None else {"seed": args.seed}
    reply = env.request("reset", **reset)
    ue, done, total, ticks = reply["ue_id"], reply["done"], 0.0, 0
    while not done:
        step = env.request("step", ue_id=ue, action=rng.randrange(n_actions))
        total += step["reward"]
        ticks += 1
        done = step["done"]
        ue = step["next_ue_id"]
    env.request("close")
    print(f"ticks={ticks} cumulative_reward={total:.6f}")


if __name__ == "__main__":
    main()
