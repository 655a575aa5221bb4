// Slave-page runtime: request a snapshot on connect, apply incoming change
// batches in seq order, recover from gaps or failed applies via resync, and
// forward user interactions to the master.

import { readConfig } from "./config";
import { Applier, DesyncError } from "./applier";
import { captureInteractions } from "./interactions";
import { NodeRegistry } from "./registry";
import { SocketFactory, Transport } from "./transport";
import { SyncMessage, recordsOf } from "./wire";

export interface SlaveRuntime {
  transport: Transport;
  registry: NodeRegistry;
  applier: Applier;
}

export function startSlave(
  doc: Document = document,
  socketFactory?: SocketFactory,
): SlaveRuntime {
  const config = readConfig(doc);
  const registry = new NodeRegistry("s");
  registry.adoptTree(doc);
  const applier = new Applier(registry, doc);

  let lastSeen = 0;
  let awaitingSnapshot = false;
  let failedSnapshots = 0;

  const requestResync = () => {
    if (failedSnapshots >= 3) {
      console.warn("screensplit: giving up after repeated snapshot failures");
      return;
    }
    awaitingSnapshot = true;
    transport.send("resync", { last_seq: lastSeen });
  };

  const onChanges = (msg: SyncMessage) => {
    const snapshot = Boolean(msg.payload.snapshot);
    if (awaitingSnapshot && !snapshot) return; // superseded by the snapshot
    if (!awaitingSnapshot) {
      if (msg.seq <= lastSeen) return; // duplicate delivery
      if (msg.seq > lastSeen + 1) {
        requestResync();
        return;
      }
    }
    try {
      const records = recordsOf(msg);
      if (snapshot) applier.applySnapshot(records);
      else applier.apply(records);
    } catch (exc) {
      if (!(exc instanceof DesyncError)) throw exc;
      if (snapshot) failedSnapshots += 1;
      lastSeen = msg.seq;
      requestResync();
      return;
    }
    lastSeen = msg.seq;
    awaitingSnapshot = false;
    failedSnapshots = 0;
  };

  const transport = new Transport({
    session: config.session,
    role: "slave",
    url: config.hub,
    socketFactory,
    onMessage: (msg) => {
      if (msg.kind === "changes") {
        onChanges(msg);
      } else if (msg.kind === "bye") {
        const final = msg.payload.final_seq;
        if (typeof final === "number" && final > lastSeen) requestResync();
      } else if (msg.kind === "hello") {
        // the master (re)joined; make sure we mirror its current state
        requestResync();
      }
    },
    onReconnect: requestResync,
  });

  captureInteractions(
    (record) => transport.send("interaction", { ...record }),
    registry,
    doc,
  );

  transport.connect();
  requestResync(); // bootstrap: adopt content and text identities
  return { transport, registry, applier };
}

declare global {
  interface Window {
    __screensplitSlave?: SlaveRuntime;
  }
}

if (typeof window !== "undefined" && document.getElementById("vs-config")) {
  window.addEventListener("DOMContentLoaded", () => {
    try {
      window.__screensplitSlave = startSlave();
    } catch (exc) {
      console.warn("screensplit slave runtime not started:", exc);
    }
  });
}
