/**
 * Parsers for the two CSV formats the segfuse CLI exports.
 *
 * Gate rows carry hard invariants (mean_gate strictly inside (0,1),
 * segment_index inside [0,48)), so a bad row is an error.  History rows are
 * softer: a malformed row is skipped with a warning so a partially written
 * file still plots.
 */

export const MAX_SEGMENTS = 48;

export interface GateCsvRow {
  trackId: string;
  label: 0 | 1;
  segmentIndex: number;
  meanGate: number;
}

export interface HistoryRow {
  epoch: number;
  trainLoss: number;
  valLoss: number;
  valAcc: number;
}

export interface HistoryParse {
  rows: HistoryRow[];
  warnings: string[];
}

const GATES_HEADER = "track_id,label,segment_index,mean_gate";
const HISTORY_HEADER = "epoch,train_loss,val_loss,val_acc";

function splitLines(text: string): string[] {
  return text.split(/\r?\n/).filter((line) => line.length > 0);
}

export function parseGatesCsv(text: string): GateCsvRow[] {
  const lines = splitLines(text);
  if (lines.length === 0 || lines[0] !== GATES_HEADER) {
    throw new Error(`gates CSV must start with header "${GATES_HEADER}"`);
  }
  const rows: GateCsvRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 4) {
      throw new Error(`gates CSV line ${i + 1}: expected 4 fields, got ${parts.length}`);
    }
    const label = Number(parts[1]);
    const segmentIndex = Number(parts[2]);
    const meanGate = Number(parts[3]);
    if (label !== 0 && label !== 1) {
      throw new Error(`gates CSV line ${i + 1}: label must be 0 or 1, got ${parts[1]}`);
    }
    if (!Number.isInteger(segmentIndex) || segmentIndex < 0 || segmentIndex >= MAX_SEGMENTS) {
      throw new Error(
        `gates CSV line ${i + 1}: segment_index must lie in [0, ${MAX_SEGMENTS}), got ${parts[2]}`,
      );
    }
    if (!Number.isFinite(meanGate) || meanGate <= 0 || meanGate >= 1) {
      throw new Error(`gates CSV line ${i + 1}: mean_gate must lie in (0, 1), got ${parts[3]}`);
    }
    rows.push({ trackId: parts[0], label, segmentIndex, meanGate });
  }
  return rows;
}

export function parseHistoryCsv(text: string): HistoryParse {
  const lines = splitLines(text);
  if (lines.length === 0 || lines[0] !== HISTORY_HEADER) {
    throw new Error(`history CSV must start with header "${HISTORY_HEADER}"`);
  }
  const rows: HistoryRow[] = [];
  const warnings: string[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    const epoch = Number(parts[0]);
    const trainLoss = Number(parts[1]);
    const valLoss = Number(parts[2]);
    const valAcc = Number(parts[3]);
    const ok =
      parts.length === 4 &&
      Number.isInteger(epoch) &&
      epoch >= 1 &&
      Number.isFinite(trainLoss) &&
      Number.isFinite(valLoss) &&
      Number.isFinite(valAcc) &&
      valAcc >= 0 &&
      valAcc <= 1;
    if (!ok) {
      warnings.push(`history CSV line ${i + 1}: skipped malformed row`);
      continue;
    }
    rows.push({ epoch, trainLoss, valLoss, valAcc });
  }
  if (rows.length === 0) {
    throw new Error("history CSV has no usable epochs");
  }
  return { rows, warnings };
}
