/** Page wiring: choose an entity CSV, post it, request a mine, resync,
 * and render the block list. One mutation may be in flight at a time;
 * the buttons stay disabled until it settles. Nothing is persisted
 * across reloads except the configured node URL. */
import { ApiError, Block, NodeApi } from "./api.js";

export const DEFAULT_NODE_URL = "http://localhost:8000";
const NODE_URL_KEY = "conflate.nodeUrl";

export interface AppHandle {
  api: () => NodeApi;
  /** Resolves once no mutation is in flight. */
  flush: () => Promise<void>;
  refreshChain: () => Promise<void>;
}

function shortHash(hash: string): string {
  return hash.slice(0, 12);
}

export function renderBlockCard(doc: Document, block: Block): HTMLElement {
  const card = doc.createElement("article");
  card.className = "block-card";
  card.dataset.index = String(block.index);
  const title = doc.createElement("h3");
  title.textContent = `#${block.index} ${shortHash(block.hash)}`;
  card.appendChild(title);

  const meta = doc.createElement("p");
  meta.className = "block-meta";
  const kind = block.ledger_kind
    ? `${block.ledger_kind} ${block.entity_id}`
    : "genesis";
  meta.textContent = kind;
  card.appendChild(meta);

  const facts = doc.createElement("dl");
  for (const [label, value, cls] of [
    ["entries", String(block.entries.length), "entry-count"],
    ["weighted citations", String(block.summary.weighted_citations), "weighted-total"],
    ["h-index", String(block.summary.h_index), "h-index"],
  ] as const) {
    const dt = doc.createElement("dt");
    dt.textContent = label;
    const dd = doc.createElement("dd");
    dd.className = cls;
    dd.textContent = value;
    facts.appendChild(dt);
    facts.appendChild(dd);
  }
  card.appendChild(facts);
  return card;
}

export function initApp(doc: Document, nodeUrl?: string): AppHandle {
  const urlInput = doc.getElementById("node-url") as HTMLInputElement;
  const fileInput = doc.getElementById("csv-file") as HTMLInputElement;
  const postButton = doc.getElementById("post-button") as HTMLButtonElement;
  const mineButton = doc.getElementById("mine-button") as HTMLButtonElement;
  const resyncButton = doc.getElementById("resync-button") as HTMLButtonElement;
  const notice = doc.getElementById("notice") as HTMLElement;
  const blockList = doc.getElementById("block-list") as HTMLElement;

  const storage = doc.defaultView?.localStorage;
  urlInput.value = nodeUrl ?? storage?.getItem(NODE_URL_KEY) ?? DEFAULT_NODE_URL;
  urlInput.addEventListener("change", () => {
    storage?.setItem(NODE_URL_KEY, urlInput.value);
  });

  const api = () => new NodeApi(urlInput.value.replace(/\/+$/, ""));

  function say(text: string, kind: "info" | "error" = "info") {
    notice.textContent = text;
    notice.className = kind;
  }

  async function refreshChain(): Promise<void> {
    const chain = await api().chain();
    blockList.replaceChildren(
      ...chain.blocks.map((block) => renderBlockCard(doc, block)),
    );
  }

  let inFlight: Promise<void> | null = null;

  function run(action: () => Promise<void>): void {
    if (inFlight) {
      return; // one mutation at a time
    }
    postButton.disabled = mineButton.disabled = resyncButton.disabled = true;
    inFlight = action()
      .catch((err) => {
        if (err instanceof ApiError && err.status === 409) {
          say(`nothing to mine: ${err.body.error}`);
        } else if (err instanceof ApiError) {
          const where =
            err.body.row != null ? ` (row ${err.body.row}${err.body.column ? `, ${err.body.column}` : ""})` : "";
          say(`${err.body.error}${where}`, "error");
        } else {
          say(String(err), "error");
        }
      })
      .finally(() => {
        inFlight = null;
        postButton.disabled = mineButton.disabled = resyncButton.disabled = false;
      });
  }

  postButton.addEventListener("click", () => {
    const file = fileInput.files?.[0];
    if (!file) {
      say("choose an entity CSV file first", "error");
      return;
    }
    run(async () => {
      const body = await file.text();
      const result = await api().postProfile(body);
      say(`accepted: ${result.accepted}`);
    });
  });

  mineButton.addEventListener("click", () => {
    run(async () => {
      const mined = await api().mine();
      say(
        `mined block #${mined.index} (${mined.entry_count} entries, ` +
          `weighted ${mined.summary.weighted_citations}, h-index ${mined.summary.h_index})`,
      );
      await refreshChain();
    });
  });

  resyncButton.addEventListener("click", () => {
    run(async () => {
      const result = await api().resync();
      say(
        `resync: replaced=${result.replaced}, length ${result.length}, ` +
          `${result.peers_checked} peers checked` +
          (result.failed_peers.length ? `, failed: ${result.failed_peers.join(", ")}` : ""),
      );
      await refreshChain();
    });
  });

  const handle: AppHandle = {
    api,
    refreshChain,
    flush: async () => {
      while (inFlight) {
        await inFlight;
      }
    },
  };
  return handle;
}
