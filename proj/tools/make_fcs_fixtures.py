#!/usr/bin/env python3
# Copyright 2026 The GateNet Toolkit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the FCS fixtures under tests/data.

Encoded with struct directly so the C++ reader is checked against an
independent writer.
"""
import os
import struct
import sys


def fcs(params, rows, datatype="F", bits=32, byteord="1,2,3,4", mode="L", tot=None,
        version="FCS3.1", extra=None):
    big = byteord in ("4,3,2,1", "2,1")
    endian = ">" if big else "<"
    if datatype == "F":
        fmt = "f"
    elif datatype == "D":
        fmt = "d"
    elif bits == 16:
        fmt = "H"
    else:
        fmt = "I"
    data = b"".join(struct.pack(endian + fmt * len(r), *r) for r in rows)
    kw = [("$BYTEORD", byteord), ("$DATATYPE", datatype), ("$MODE", mode), ("$NEXTDATA", "0"),
          ("$PAR", str(len(params))), ("$TOT", str(len(rows) if tot is None else tot))]
    for i, name in enumerate(params, 1):
        kw += [(f"$P{i}N", name), (f"$P{i}B", str(bits)), (f"$P{i}E", "0,0"), (f"$P{i}R", "1024")]
    kw += list(extra or [])
    # Fixed-width placeholders keep TEXT length independent of the offsets.
    kw += [("$BEGINANALYSIS", "0"), ("$ENDANALYSIS", "0"), ("$BEGINSTEXT", "0"), ("$ENDSTEXT", "0"),
           ("$BEGINDATA", "{bd:>12}"), ("$ENDDATA", "{ed:>12}")]
    text_tmpl = "/" + "".join(f"{k}/{v.replace('/', '//')}/" for k, v in kw)
    text_begin = 58
    text_len = len(text_tmpl.format(bd=0, ed=0).encode())
    text_end = text_begin + text_len - 1
    data_begin = text_end + 1
    data_end = data_begin + len(data) - 1
    text = text_tmpl.format(bd=data_begin, ed=data_end).encode()
    header = version.encode() + b"    " + b"".join(f"{v:>8}".encode() for v in
                                                   (text_begin, text_end, data_begin, data_end, 0, 0))
    assert len(header) == 58
    return header + text + data


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    rows = [(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]
    fixtures = {
        "float_le.fcs": fcs(["FSC", "SSC"], rows),
        "float_be.fcs": fcs(["FSC", "SSC"], rows, byteord="4,3,2,1"),
        "float_v30.fcs": fcs(["FSC", "SSC"], rows, version="FCS3.0"),
        "int16_le.fcs": fcs(["FSC", "SSC"], [(1, 2), (3, 4), (5, 6)], datatype="I", bits=16, byteord="1,2"),
        "int16_be.fcs": fcs(["FSC", "SSC"], [(1, 2), (3, 4), (5, 6)], datatype="I", bits=16, byteord="2,1"),
        "int32_le.fcs": fcs(["FSC", "SSC"], [(1, 2), (3, 4), (70000, 6)], datatype="I", bits=32),
        "escaped_name.fcs": fcs(["FSC", "CD4/CD8"], rows),
        "tot_zero.fcs": fcs(["FSC", "SSC"], [], tot=0),
        "length_mismatch.fcs": fcs(["FSC", "SSC"], rows, tot=4),
        "mode_c.fcs": fcs(["FSC", "SSC"], rows, mode="C"),
        "datatype_d.fcs": fcs(["FSC", "SSC"], rows, datatype="D", bits=64),
        "fcs2.fcs": fcs(["FSC", "SSC"], rows, version="FCS2.0"),
    }
    for name, payload in fixtures.items():
        with open(os.path.join(out_dir, name), "wb") as f:
            f.write(payload)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "tests", "data"))
