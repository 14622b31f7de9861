// View state as a pure function of the event stream plus in-flight gesture
// state. Replaying the same events always reconstructs the identical view.

import { BoardState, PickResponse, SessionEvent } from './types';

export interface PendingProposal {
  objectId: number;
  proposal: number;
  distribution: Record<string, number>;
  vacant: number[];
}

export interface ViewState {
  board: BoardState | null;
  theta: number[][];
  accuracySeries: number[];
  pending: PendingProposal | null;
  stepsTotal: number;
  episodeIndex: number;
  connected: boolean;
}

export function initialView(numObjects: number, numLocations: number): ViewState {
  return {
    board: null,
    theta: Array.from({ length: numObjects }, () => new Array<number>(numLocations).fill(0)),
    accuracySeries: [],
    pending: null,
    stepsTotal: 0,
    episodeIndex: 0,
    connected: true,
  };
}

/** Apply one theta delta in place-free style; at most two cells change. */
export function applyThetaDelta(
  theta: number[][],
  delta: { object: number; location: number; delta: number }[],
): number[][] {
  if (delta.length === 0) return theta;
  const next = theta.map((row) => row.slice());
  for (const d of delta) {
    next[d.object][d.location] += d.delta;
  }
  return next;
}

/** Cells whose value differs between two heatmaps, as "o:l" keys. */
export function changedCells(before: number[][], after: number[][]): string[] {
  const out: string[] = [];
  for (let o = 0; o < before.length; o++) {
    for (let l = 0; l < before[o].length; l++) {
      if (before[o][l] !== after[o][l]) out.push(`${o}:${l}`);
    }
  }
  return out;
}

export function applyEvent(view: ViewState, ev: SessionEvent): ViewState {
  switch (ev.type) {
    case 'state':
      return { ...view, board: ev.payload, pending: null };
    case 'turn':
      return {
        ...view,
        theta: applyThetaDelta(view.theta, ev.payload.theta_delta),
        stepsTotal: view.stepsTotal + 1,
      };
    case 'metrics':
      return {
        ...view,
        accuracySeries: ev.payload.per_episode_accuracy,
        episodeIndex: ev.payload.episode_index,
      };
    case 'theta':
      // authoritative snapshot; overrides locally accumulated deltas
      return { ...view, theta: ev.payload.theta_snapshot };
  }
}

export function applyPick(view: ViewState, pick: PickResponse): ViewState {
  return {
    ...view,
    pending: {
      objectId: pick.object_id,
      proposal: pick.proposal,
      distribution: pick.distribution,
      vacant: pick.vacant,
    },
  };
}

export function replay(view: ViewState, events: SessionEvent[]): ViewState {
  return events.reduce(applyEvent, view);
}

export function canPick(view: ViewState, objectId: number): boolean {
  return (
    view.pending === null &&
    view.board !== null &&
    view.board.unplaced.includes(objectId)
  );
}

export function canCorrect(view: ViewState, locationId: number): boolean {
  return view.pending !== null && view.pending.vacant.includes(locationId);
}
