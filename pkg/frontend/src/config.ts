// Runtime configuration injected by the splitter as <script id="vs-config">.

export interface RuntimeConfig {
  session: string;
  hub: string;
  role: "master" | "slave";
}

export function readConfig(doc: Document = document): RuntimeConfig {
  const el = doc.getElementById("vs-config");
  if (!el || !el.textContent) {
    throw new Error("vs-config element missing; page was not split by the engine");
  }
  const raw = JSON.parse(el.textContent) as Partial<RuntimeConfig>;
  if (!raw.session || !raw.hub || (raw.role !== "master" && raw.role !== "slave")) {
    throw new Error("vs-config is incomplete");
  }
  return { session: raw.session, hub: raw.hub, role: raw.role };
}
