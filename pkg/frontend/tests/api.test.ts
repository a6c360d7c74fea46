import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { FakeServer } from './fakes.js';

describe('api client', () => {
  it('prefixes the configured base url', async () => {
    const seen: string[] = [];
    const client = new ApiClient('http://api.local:8732', async (input) => {
      seen.push(input);
      return { ok: true, status: 200, json: async () => [] } as unknown as Response;
    });
    await client.listPendingTasks();
    expect(seen).toEqual(['http://api.local:8732/api/v1/tasks?state=pending']);
  });

  it('surfaces server error bodies as ApiError', async () => {
    const server = new FakeServer();
    const client = new ApiClient('', server.fetch);
    await expect(client.taskDetail('T404')).rejects.toMatchObject({
      code: 'task_not_found',
      status: 404,
    });
  });

  it('maps network failure to an unreachable ApiError', async () => {
    const client = new ApiClient('', async () => {
      throw new TypeError('fetch failed');
    });
    const failure = await client.listPendingTasks().catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.code).toBe('unreachable');
    expect(failure.status).toBe(0);
  });

  it('encodes task ids in paths', async () => {
    const seen: string[] = [];
    const client = new ApiClient('', async (input) => {
      seen.push(input);
      return { ok: true, status: 200, json: async () => ({}) } as unknown as Response;
    });
    await client.taskDetail('T 1/x');
    expect(seen[0]).toBe('/api/v1/tasks/T%201%2Fx');
  });
});
