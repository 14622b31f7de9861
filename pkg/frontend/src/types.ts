// Wire types for the collaboration service (schema blrhac-service-v1).

export interface EnvSpec {
  num_objects: number;
  num_locations: number;
  capacity_per_location: number;
  name: string;
}

export interface BoardState {
  turn_index: number;
  episode_objects: number[];
  placement: Record<string, number>; // object id -> location (-1 = unplaced)
  occupancy: Record<string, number>; // location id -> object (-1 = empty)
  unplaced: number[];
  vacant: number[];
}

export interface ThetaDeltaEntry {
  object: number;
  location: number;
  delta: number;
}

export interface CreateSessionResponse {
  schema: string;
  session_id: string;
  agent_kind: string;
  env: EnvSpec;
  episode_index: number;
  state: BoardState;
  theta_snapshot: number[][];
}

export interface PickResponse {
  schema: string;
  session_id: string;
  object_id: number;
  proposal: number;
  distribution: Record<string, number>;
  vacant: number[];
}

export interface CorrectionResponse {
  schema: string;
  session_id: string;
  state: BoardState;
  theta_delta: ThetaDeltaEntry[];
  accurate: boolean;
  episode_complete: boolean;
  episode_index: number;
  per_episode_accuracy: number[];
}

export interface MetricsResponse {
  schema: string;
  session_id: string;
  per_episode_accuracy: number[];
  episode_index: number;
  steps_total: number;
  cumulative_inference_flops: number;
  cumulative_update_flops: number;
  theta_snapshot: number[][];
}

export type SessionEvent =
  | { seq: number; type: 'state'; payload: BoardState }
  | {
      seq: number;
      type: 'turn';
      payload: {
        object_id: number;
        proposal: number;
        correction: number;
        accurate: boolean;
        theta_delta: ThetaDeltaEntry[];
      };
    }
  | { seq: number; type: 'metrics'; payload: MetricsResponse }
  | { seq: number; type: 'theta'; payload: { theta_snapshot: number[][] } };
