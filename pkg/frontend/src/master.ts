// Master-page runtime: observe mirrored content, answer resyncs, dispatch
// forwarded interactions on the hidden counterparts, and drive the live
// region selector (Ctrl+Shift+S).

import { readConfig } from "./config";
import { Applier } from "./applier";
import { dispatchInteraction } from "./interactions";
import { MasterObserver, patchNativeHooks } from "./observer";
import { RegionSelector, regionQuery } from "./overlay";
import { NodeRegistry } from "./registry";
import { SocketFactory, Transport } from "./transport";
import { InteractionRecord, changesPayload, recordsOf } from "./wire";

export interface MasterRuntime {
  transport: Transport;
  observer: MasterObserver;
  selector: RegionSelector;
  registry: NodeRegistry;
}

export function startMaster(
  doc: Document = document,
  socketFactory?: SocketFactory,
): MasterRuntime {
  const config = readConfig(doc);
  const registry = new NodeRegistry("m");
  registry.adoptTree(doc);
  const applier = new Applier(registry, doc);

  const observer = new MasterObserver(
    registry,
    (records) => transport.send("changes", changesPayload(records)),
    doc,
  );

  const transport = new Transport({
    session: config.session,
    role: "master",
    url: config.hub,
    socketFactory,
    onMessage: (msg) => {
      if (msg.kind === "resync") {
        const records = observer.snapshotRecords();
        transport.send("changes", changesPayload(records, true));
      } else if (msg.kind === "interaction") {
        const record = msg.payload as unknown as InteractionRecord;
        dispatchInteraction(record, registry, doc);
      } else if (msg.kind === "changes") {
        // annotation updates after an engine-side re-split; applying them
        // must not echo back through the observer
        observer.silently(() => applier.apply(recordsOf(msg)));
      }
    },
  });

  const selector = new RegionSelector((outcome) => {
    transport.send("geometry", outcome.geometry);
    transport.send("split_request", regionQuery(outcome.region));
  }, doc);

  doc.addEventListener("keydown", (ev) => {
    if (ev.ctrlKey && ev.shiftKey && (ev.key === "S" || ev.key === "s")) {
      ev.preventDefault();
      if (!selector.active) selector.start();
    }
  });

  patchNativeHooks(registry, doc);
  observer.start();
  transport.connect();
  return { transport, observer, selector, registry };
}

declare global {
  interface Window {
    __screensplitMaster?: MasterRuntime;
  }
}

if (typeof window !== "undefined" && document.getElementById("vs-config")) {
  window.addEventListener("DOMContentLoaded", () => {
    try {
      window.__screensplitMaster = startMaster();
    } catch (exc) {
      console.warn("screensplit master runtime not started:", exc);
    }
  });
}
