/**
 * Reference regression backends served over the wire protocol.
 *
 * ols-ref is least squares through a Householder QR of the intercept-
 * augmented design - the numerical twin of the core library's in-core
 * ols regressor. knn-miss is distance-weighted k-nearest-neighbors over
 * the coordinates a query and a context row both observe, so missing
 * values (NaN) need no imputation on either side.
 *
 * Both backends are deterministic whether or not --deterministic is set,
 * and both treat every inbound column as a plain feature; indicator or
 * missing-token encodings are the client's business. In-context
 * foundation-model backends would register here when their runtime is
 * importable; none ship with the reference sidecar.
 */

import { SidecarError } from "./wire";

export interface FittedModel {
  predict(X: number[][]): number[];
}

export interface Backend {
  readonly supportsMissing: boolean;
  /** Backend-specific context-row cap; null defers to the server's. */
  readonly maxContext: number | null;
  readonly defaultEnsemble: number;
  fit(X: number[][], y: number[], ensembleSize: number): FittedModel;
}

function requireNoMissing(name: string, X: number[][], y: number[] | null): void {
  for (const row of X) {
    for (const x of row) {
      if (Number.isNaN(x)) {
        throw new SidecarError("MISSING_UNSUPPORTED", `${name} cannot take NaN features`);
      }
    }
  }
  if (y !== null) {
    for (const v of y) {
      if (Number.isNaN(v)) {
        throw new SidecarError("MISSING_UNSUPPORTED", `${name} cannot take NaN targets`);
      }
    }
  }
}

/**
 * Least squares on [1 | X] via Householder QR without pivoting.
 * Returns the intercept-first coefficient vector.
 */
export function solveLeastSquares(X: number[][], y: number[]): number[] {
  const n = X.length;
  const d = n > 0 ? X[0].length : 0;
  const p = d + 1;
  if (n < p) {
    throw new SidecarError("BACKEND_FAILURE", `ols-ref needs at least ${p} rows, got ${n}`);
  }
  // column-major design, annihilated in place; cols[j][i] = row i, column j
  const cols: number[][] = [new Array<number>(n).fill(1)];
  for (let j = 0; j < d; j++) cols.push(X.map((row) => row[j]));
  const rhs = y.slice();
  const rdiag = new Array<number>(p);
  let maxPivot = 0;

  for (let k = 0; k < p; k++) {
    const col = cols[k];
    let norm = 0;
    for (let i = k; i < n; i++) norm = Math.hypot(norm, col[i]);
    const alpha = col[k] > 0 ? -norm : norm;
    maxPivot = Math.max(maxPivot, Math.abs(alpha));
    if (Math.abs(alpha) <= 1e-10 * Math.max(1, maxPivot)) {
      throw new SidecarError("BACKEND_FAILURE", "ols-ref design matrix is rank deficient");
    }
    // reflector v lives in col[k..]; v = x - alpha*e1
    col[k] -= alpha;
    let vtv = 0;
    for (let i = k; i < n; i++) vtv += col[i] * col[i];
    for (let j = k + 1; j < p; j++) {
      const target = cols[j];
      let dot = 0;
      for (let i = k; i < n; i++) dot += col[i] * target[i];
      const f = (2 * dot) / vtv;
      for (let i = k; i < n; i++) target[i] -= f * col[i];
    }
    let dot = 0;
    for (let i = k; i < n; i++) dot += col[i] * rhs[i];
    const f = (2 * dot) / vtv;
    for (let i = k; i < n; i++) rhs[i] -= f * col[i];
    rdiag[k] = alpha;
  }

  // back substitution on R (strict upper part sits in cols[j][k], j > k)
  const beta = new Array<number>(p).fill(0);
  for (let k = p - 1; k >= 0; k--) {
    let s = rhs[k];
    for (let j = k + 1; j < p; j++) s -= cols[j][k] * beta[j];
    beta[k] = s / rdiag[k];
  }
  return beta;
}

class OlsModel implements FittedModel {
  constructor(private readonly beta: number[]) {}

  predict(X: number[][]): number[] {
    requireNoMissing("ols-ref", X, null);
    return X.map((row) => {
      if (row.length !== this.beta.length - 1) {
        throw new SidecarError(
          "SHAPE",
          `predict rows have ${row.length} columns, model was fit with ${this.beta.length - 1}`,
        );
      }
      let value = this.beta[0];
      for (let j = 0; j < row.length; j++) value += this.beta[j + 1] * row[j];
      return value;
    });
  }
}

/** Per-column std over observed entries; degenerate columns scale by 1. */
function columnScales(X: number[][], d: number): number[] {
  const scales = new Array<number>(d).fill(1);
  for (let j = 0; j < d; j++) {
    let count = 0;
    let mean = 0;
    let m2 = 0;
    for (const row of X) {
      const x = row[j];
      if (Number.isNaN(x)) continue;
      count += 1;
      const delta = x - mean;
      mean += delta / count;
      m2 += delta * (x - mean);
    }
    if (count > 1) {
      const sd = Math.sqrt(m2 / (count - 1));
      if (sd > 0) scales[j] = sd;
    }
  }
  return scales;
}

class KnnMissModel implements FittedModel {
  private readonly fallback: number;

  constructor(
    private readonly X: number[][],
    private readonly y: number[],
    private readonly scales: number[],
    private readonly k: number,
  ) {
    this.fallback = y.reduce((a, b) => a + b, 0) / y.length;
  }

  predict(Q: number[][]): number[] {
    return Q.map((q) => {
      if (q.length !== this.scales.length) {
        throw new SidecarError(
          "SHAPE",
          `predict rows have ${q.length} columns, model was fit with ${this.scales.length}`,
        );
      }
      // mean squared standardized distance over co-observed coordinates
      const scored = this.X.map((row, i) => {
        let sum = 0;
        let seen = 0;
        for (let j = 0; j < q.length; j++) {
          if (Number.isNaN(q[j]) || Number.isNaN(row[j])) continue;
          const delta = (q[j] - row[j]) / this.scales[j];
          sum += delta * delta;
          seen += 1;
        }
        return { dist: seen > 0 ? sum / seen : Infinity, index: i };
      });
      scored.sort((a, b) => a.dist - b.dist || a.index - b.index);
      let weightSum = 0;
      let valueSum = 0;
      for (const { dist, index } of scored.slice(0, this.k)) {
        if (dist === Infinity) continue;
        const w = 1 / (dist + 1e-12);
        weightSum += w;
        valueSum += w * this.y[index];
      }
      return weightSum > 0 ? valueSum / weightSum : this.fallback;
    });
  }
}

const olsRef: Backend = {
  supportsMissing: false,
  maxContext: null,
  defaultEnsemble: 1,
  fit(X, y) {
    requireNoMissing("ols-ref", X, y);
    return new OlsModel(solveLeastSquares(X, y));
  },
};

const knnMiss: Backend = {
  supportsMissing: true,
  maxContext: null,
  defaultEnsemble: 1,
  // ensembleSize is accepted but moot: identical deterministic members
  // average to themselves.
  fit(X, y) {
    if (X.length === 0) {
      throw new SidecarError("BACKEND_FAILURE", "knn-miss needs a non-empty context");
    }
    for (const v of y) {
      if (Number.isNaN(v)) {
        throw new SidecarError("MISSING_UNSUPPORTED", "knn-miss cannot take NaN targets");
      }
    }
    const d = X[0].length;
    const k = Math.max(1, Math.min(16, Math.floor(Math.sqrt(X.length))));
    return new KnnMissModel(X, y, columnScales(X, d), k);
  },
};

export const BACKENDS: ReadonlyMap<string, Backend> = new Map([
  ["ols-ref", olsRef],
  ["knn-miss", knnMiss],
]);
