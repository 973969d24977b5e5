/** Request signing and event authorship with the operator's Ed25519 key. */

import { ed25519 } from "@noble/curves/ed25519.js";
import { sha256 } from "@noble/hashes/sha2.js";

import { Canonical, canonicalBytes, canonicalJson, fromHex, toHex } from "./canonical.js";

export interface Identity {
  memberId: string;
  publicKey: Uint8Array;
  sign(message: Uint8Array): Uint8Array;
}

export function identityFromSeedHex(seedHex: string): Identity {
  const seed = fromHex(seedHex.trim());
  if (seed.length !== 32) {
    throw new Error("signing key seed must be 32 bytes of hex");
  }
  const publicKey = ed25519.getPublicKey(seed);
  return {
    memberId: toHex(sha256(publicKey)),
    publicKey,
    sign: (message) => ed25519.sign(message, seed),
  };
}

/** Headers for one API request: signature over (method, target, body digest, timestamp). */
export function authHeaders(
  identity: Identity,
  method: string,
  target: string,
  body: Uint8Array,
  nowMs: number,
): Record<string, string> {
  const payload: Canonical = {
    body_digest: toHex(sha256(body)),
    method,
    target,
    timestamp: nowMs,
  };
  const signature = identity.sign(canonicalBytes(payload));
  return {
    "x-member": identity.memberId,
    "x-timestamp": String(nowMs),
    "x-signature": toHex(signature),
  };
}

export interface WireEvent {
  body: Canonical;
  event_id: string;
  kind: number;
  submitted_at: number;
  submitter: string;
  submitter_signature: string;
}

/** Build a fully signed event record; the id and signature cover the
 * canonical core (body, kind, submitted_at, submitter). */
export function makeEvent(
  kind: number,
  body: Canonical,
  identity: Identity,
  submittedAt: number,
): WireEvent {
  const core: Canonical = {
    body,
    kind,
    submitted_at: submittedAt,
    submitter: identity.memberId,
  };
  const coreBytes = canonicalBytes(core);
  return {
    body,
    event_id: toHex(sha256(coreBytes)),
    kind,
    submitted_at: submittedAt,
    submitter: identity.memberId,
    submitter_signature: toHex(identity.sign(coreBytes)),
  };
}

export { canonicalJson };
