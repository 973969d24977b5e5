/**
 * Canonical JSON, byte-compatible with the node's serialization rules:
 * object keys sorted lexicographically, no insignificant whitespace,
 * integers in base 10, byte strings as lowercase hex, UTF-8 text.
 * Everything signed or hashed goes through here.
 */

export type Canonical =
  | null
  | boolean
  | number
  | string
  | Canonical[]
  | { [key: string]: Canonical };

export function canonicalJson(value: Canonical): string {
  if (value === null || typeof value === "boolean") {
    return JSON.stringify(value);
  }
  if (typeof value === "number") {
    if (!Number.isSafeInteger(value)) {
      throw new Error(`non-integer number is not canonical: ${value}`);
    }
    return String(value);
  }
  if (typeof value === "string") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const keys = Object.keys(value).sort();
  const parts = keys.map((k) => {
    const v = value[k];
    if (v === undefined) {
      throw new Error(`undefined value at key ${k}`);
    }
    return JSON.stringify(k) + ":" + canonicalJson(v);
  });
  return "{" + parts.join(",") + "}";
}

export function canonicalBytes(value: Canonical): Uint8Array {
  return new TextEncoder().encode(canonicalJson(value));
}

export function toHex(raw: Uint8Array): string {
  let out = "";
  for (const b of raw) {
    out += b.toString(16).padStart(2, "0");
  }
  return out;
}

export function fromHex(text: string): Uint8Array {
  if (!/^[0-9a-f]*$/.test(text) || text.length % 2 !== 0) {
    throw new Error(`not lowercase hex: ${text}`);
  }
  const out = new Uint8Array(text.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(text.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}
