#!/usr/bin/env python3
"""Convert torchvision ResNet18 weights into a mustan named-array archive.

    python3 tools/export_resnet18.py -o resnet18.mustan
    python3 tools/export_resnet18.py --state-dict resnet18.pth -o resnet18.mustan

Point ModelConfig.pretrained_path (or MUSTAN_RESNET18_WEIGHTS) at the output.
"""

import argparse
import json
import struct

import numpy as np
import torch
import torchvision

MAGIC = b"MUSTANCK"
VERSION = 1


def fnv1a64(data: bytes) -> int:
    h = 1469598103934665603
    for b in data:
        h ^= b
        h = (h * 1099511628211) & 0xFFFFFFFFFFFFFFFF
    return h


def as_nchw(shape):
    shape = list(shape)
    if len(shape) > 4:
        raise ValueError(f"cannot store rank-{len(shape)} tensor")
    return shape + [1] * (4 - len(shape))


def load_state_dict(path):
    if path:
        return torch.load(path, map_location="cpu")
    weights = torchvision.models.ResNet18_Weights.IMAGENET1K_V1
    return torchvision.models.resnet18(weights=weights).state_dict()


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-o", "--out", required=True)
    parser.add_argument("--state-dict", help="local .pth file instead of downloading")
    args = parser.parse_args()

    arrays, chunks, offset = [], [], 0
    for name, tensor in load_state_dict(args.state_dict).items():
        if name.startswith("fc.") or name.endswith("num_batches_tracked"):
            continue
        values = tensor.detach().cpu().numpy().astype("<f4").ravel()
        arrays.append({"name": name, "shape": as_nchw(tensor.shape), "offset": offset, "count": int(values.size)})
        chunks.append(values.tobytes())
        offset += values.size

    payload = b"".join(chunks)
    header = {
        "source": "torchvision resnet18",
        "dtype": "float32",
        "arrays": arrays,
        "payload_bytes": len(payload),
        "payload_fnv1a64": fnv1a64(payload),
    }
    text = json.dumps(header).encode("utf-8")
    with open(args.out, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(text)))
        f.write(text)
        f.write(payload)
    print(f"{len(arrays)} arrays -> {args.out}")


if __name__ == "__main__":
    main()
