/** Thin typed client for the ledger node's HTTP API. The UI never
 * computes metrics itself; every number it shows comes from one of
 * these responses. */

export interface BlockSummary {
  weighted_citations: number;
  h_index: number;
}

export interface LedgerEntry {
  record_doi: string;
  n_sources: number;
  common_count: number;
  unique_count: number;
  weighted_citations: number;
}

export interface Block {
  index: number;
  timestamp: number;
  ledger_kind: string;
  entity_id: string;
  entries: LedgerEntry[];
  summary: BlockSummary;
  previous_hash: string;
  nonce: number;
  hash: string;
}

export interface ChainResponse {
  length: number;
  difficulty: number;
  blocks: Block[];
}

export interface PostProfileResponse {
  accepted: number;
}

export interface MineResponse {
  index: number;
  hash: string;
  entry_count: number;
  summary: BlockSummary;
}

export interface ResyncResponse {
  replaced: boolean;
  length: number;
  peers_checked: number;
  failed_peers: string[];
}

export interface ErrorBody {
  error: string;
  row?: number | null;
  column?: string | null;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ErrorBody,
  ) {
    super(body.error);
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({ error: response.statusText }));
  if (!response.ok) {
    throw new ApiError(response.status, body as ErrorBody);
  }
  return body as T;
}

export class NodeApi {
  constructor(public readonly baseUrl: string) {}

  postProfile(csvText: string): Promise<PostProfileResponse> {
    return fetch(`${this.baseUrl}/profile`, {
      method: "POST",
      headers: { "content-type": "text/plain; charset=utf-8" },
      body: csvText,
    }).then((r) => parse<PostProfileResponse>(r));
  }

  mine(): Promise<MineResponse> {
    return fetch(`${this.baseUrl}/mine`, { method: "POST" }).then((r) =>
      parse<MineResponse>(r),
    );
  }

  resync(): Promise<ResyncResponse> {
    return fetch(`${this.baseUrl}/resync`, { method: "POST" }).then((r) =>
      parse<ResyncResponse>(r),
    );
  }

  chain(): Promise<ChainResponse> {
    return fetch(`${this.baseUrl}/chain`).then((r) => parse<ChainResponse>(r));
  }
}
