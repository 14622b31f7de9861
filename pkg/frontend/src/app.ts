// DOM wiring for the playground. Renders only what the service sends.

import { ApiError, ServiceClient } from './api';
import { cssColor, divergingColor, maxAbsValue, probabilityOpacity } from './heatmap';
import {
  ViewState,
  applyEvent,
  applyPick,
  canCorrect,
  canPick,
  initialView,
} from './state';
import { CreateSessionResponse, SessionEvent } from './types';

const client = new ServiceClient('');

let view: ViewState = initialView(0, 0);
let sessionId: string | null = null;
let closeStream: (() => void) | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string | null): void {
  const banner = el<HTMLDivElement>('banner');
  banner.textContent = text ?? '';
  banner.style.display = text ? 'block' : 'none';
}

function render(): void {
  renderTray();
  renderBoard();
  renderHeatmap();
  renderChart();
  el<HTMLSpanElement>('episode').textContent = String(view.episodeIndex + 1);
}

function renderTray(): void {
  const tray = el<HTMLDivElement>('tray');
  tray.replaceChildren();
  if (!view.board) return;
  for (const obj of view.board.unplaced) {
    const btn = document.createElement('button');
    btn.className = 'object';
    btn.textContent = `o${obj}`;
    btn.disabled = !canPick(view, obj);
    btn.onclick = () => void pick(obj);
    tray.appendChild(btn);
  }
}

function renderBoard(): void {
  const board = el<HTMLDivElement>('board');
  board.replaceChildren();
  if (!view.board) return;
  const occupancy = view.board.occupancy;
  for (const key of Object.keys(occupancy)) {
    const loc = Number(key);
    const cell = document.createElement('button');
    cell.className = 'cell';
    const occupant = occupancy[key];
    if (occupant >= 0) {
      cell.textContent = `o${occupant}`;
      cell.classList.add('occupied');
    } else {
      cell.textContent = `l${loc}`;
    }
    if (view.pending) {
      const p = view.pending.distribution[key] ?? 0;
      if (p > 0) {
        cell.style.background = `rgba(33, 102, 172, ${probabilityOpacity(p)})`;
        cell.title = p.toFixed(3);
      }
      if (loc === view.pending.proposal) cell.classList.add('proposal');
      cell.disabled = !canCorrect(view, loc);
      cell.onclick = () => void correct(loc);
    } else {
      cell.disabled = true;
    }
    board.appendChild(cell);
  }
  const confirm = el<HTMLButtonElement>('confirm');
  confirm.disabled = view.pending === null;
  confirm.onclick = () => {
    if (view.pending) void correct(view.pending.proposal);
  };
}

function renderHeatmap(): void {
  const map = el<HTMLDivElement>('heatmap');
  map.replaceChildren();
  const maxAbs = maxAbsValue(view.theta);
  map.style.gridTemplateColumns = `repeat(${view.theta[0]?.length ?? 0}, 1fr)`;
  view.theta.forEach((row, o) => {
    row.forEach((value, l) => {
      const cell = document.createElement('div');
      cell.className = 'hcell';
      cell.style.background = cssColor(divergingColor(value, maxAbs));
      cell.title = `theta[o${o}, l${l}] = ${value.toFixed(2)}`;
      map.appendChild(cell);
    });
  });
}

function renderChart(): void {
  const chart = el<HTMLDivElement>('chart');
  chart.replaceChildren();
  view.accuracySeries.forEach((acc, i) => {
    const bar = document.createElement('div');
    bar.className = 'bar';
    bar.style.height = `${Math.round(acc * 100)}%`;
    bar.title = `episode ${i + 1}: ${acc.toFixed(2)}`;
    chart.appendChild(bar);
  });
}

function onEvent(ev: SessionEvent): void {
  view = applyEvent(view, ev);
  render();
}

async function pick(objectId: number): Promise<void> {
  if (!sessionId) return;
  try {
    view = applyPick(view, await client.submitPick(sessionId, objectId));
    render();
  } catch (e) {
    reportError(e);
  }
}

async function correct(locationId: number): Promise<void> {
  if (!sessionId) return;
  try {
    await client.submitCorrection(sessionId, locationId);
    view = { ...view, pending: null };
    // board/theta/chart arrive through the event stream
  } catch (e) {
    reportError(e);
  }
}

function reportError(e: unknown): void {
  if (e instanceof ApiError) {
    setBanner(`${e.code}: ${e.message}`);
  } else {
    setBanner('connection lost; retrying');
  }
}

async function start(): Promise<void> {
  const env = el<HTMLSelectElement>('env').value;
  const agent = el<HTMLSelectElement>('agent').value;
  const checkpoint = el<HTMLSelectElement>('checkpoint').value || undefined;
  try {
    const created: CreateSessionResponse = await client.createSession({
      env,
      agent_kind: agent,
      checkpoint,
      seed: Math.floor(Math.random() * 1e6),
    });
    sessionId = created.session_id;
    view = initialView(created.env.num_objects, created.env.num_locations);
    view = applyEvent(view, { seq: 0, type: 'state', payload: created.state });
    view = { ...view, theta: created.theta_snapshot };
    closeStream?.();
    closeStream = client.streamEvents(sessionId, onEvent, () =>
      setBanner('connection lost; retrying'),
    );
    setBanner(null);
    render();
  } catch (e) {
    reportError(e);
  }
}

async function loadCheckpoints(): Promise<void> {
  try {
    const { checkpoints } = await client.listCheckpoints();
    const select = el<HTMLSelectElement>('checkpoint');
    for (const ckpt of checkpoints) {
      const option = document.createElement('option');
      option.value = ckpt.name;
      option.textContent = ckpt.name;
      select.appendChild(option);
    }
  } catch {
    // service may run without a checkpoint directory
  }
}

export function main(): void {
  el<HTMLButtonElement>('start').onclick = () => void start();
  void loadCheckpoints();
}

if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', main);
}
