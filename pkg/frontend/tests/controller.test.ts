// The UI contract, driven end to end against the stateful fake server:
// polling picks up a seeded task, the approve-with-synonyms flow lands on
// the result view and the task leaves the inbox, and a double submit causes
// exactly one store write.

import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { Controller, POLL_INTERVAL_MS } from '../src/controller.js';
import { FakeServer } from './fakes.js';

let server: FakeServer;
let controller: Controller;

function makeController() {
  const api = new ApiClient('', server.fetch);
  return new Controller(api, () => {}, { reviewer: 'hana' });
}

beforeEach(() => {
  vi.useFakeTimers();
  server = new FakeServer();
  controller = makeController();
});

afterEach(() => {
  controller.stop();
  vi.useRealTimers();
});

describe('inbox polling', () => {
  it('renders the empty state when no tasks are pending', async () => {
    await controller.start();
    expect(controller.html).toContain('No pending tasks.');
  });

  it('lists a newly seeded task within one poll interval', async () => {
    await controller.start();
    expect(controller.html).not.toContain('data-task="T1"');
    server.seedTask();
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(controller.html).toContain('data-task="T1"');
  });

  it('shows a retry banner when the API is unreachable and recovers', async () => {
    server.offline = true;
    await controller.start();
    expect(controller.html).toContain('API unreachable');
    expect(controller.html).toContain('data-action="retry"');
    server.offline = false;
    server.seedTask();
    await controller.refreshInbox();
    expect(controller.html).toContain('data-task="T1"');
  });

  it('drops rows decided elsewhere on the next poll', async () => {
    server.seedTask();
    await controller.start();
    expect(controller.html).toContain('data-task="T1"');
    server.decided.add('T1');
    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(controller.html).toContain('No pending tasks.');
  });
});

describe('approve-with-synonyms flow', () => {
  it('walks inbox -> form -> result and the task leaves the inbox', async () => {
    server.seedTask();
    await controller.start();
    await controller.openTask('T1');
    expect(controller.view).toBe('task');
    // the advisor's suggestion preselects the category, so submit is live
    expect(controller.html).not.toContain('data-action="submit-approve" disabled');

    const sent = await controller.submitApprove();
    expect(sent).toBe(true);
    expect(controller.view).toBe('result');
    expect(controller.html).toContain('The final result is approval.');
    expect(controller.html).toContain('<td>Simply Black</td>');
    expect(controller.html).toContain('Allowable categories for Organizational Activation Cost');
    expect(server.decisionBodies[0].item_resolutions[0]).toEqual({
      original_name: 'Simply Black',
      category: 'Food',
      save_synonyms: true,
      synonyms: ['Simply Smooth Black'],
    });

    await controller.showInbox();
    expect(controller.html).toContain('No pending tasks.');
  });

  it('unchecking save-synonyms sends no synonyms', async () => {
    server.seedTask();
    await controller.openTask('T1');
    controller.toggleSaveSynonyms(false);
    await controller.submitApprove();
    expect(server.decisionBodies[0].item_resolutions[0].synonyms).toEqual([]);
  });

  it('missing category blocks the request and shows inline validation', async () => {
    const detail = server.seedTask();
    detail.items[0].recommendation = null; // nothing preselected
    await controller.openTask('T1');
    const requestsBefore = server.requestCount;
    const sent = await controller.submitApprove();
    expect(sent).toBe(false);
    expect(server.requestCount).toBe(requestsBefore); // no request sent
    expect(controller.html).toContain('Choose a category for Simply Black.');
    controller.chooseCategory('Simply Black', 'Food');
    expect(await controller.submitApprove()).toBe(true);
  });

  it('a double-click submits exactly once (one store write)', async () => {
    server.seedTask();
    await controller.openTask('T1');
    const [first, second] = await Promise.all([
      controller.submitApprove(),
      controller.submitApprove(),
    ]);
    expect([first, second].filter(Boolean)).toHaveLength(1);
    expect(server.storeWrites).toBe(1);
    expect(server.decisionBodies).toHaveLength(1);
  });

  it('a 409 from a task decided elsewhere shows the note and refreshes', async () => {
    server.seedTask();
    await controller.openTask('T1');
    server.decided.add('T1'); // someone else decided meanwhile
    const sent = await controller.submitApprove();
    expect(sent).toBe(false);
    expect(controller.view).toBe('inbox');
    expect(controller.html).toContain('already decided');
    expect(server.storeWrites).toBe(0);
  });

  it('rejection flows to the result view with the rejection banner', async () => {
    server.seedTask();
    await controller.openTask('T1');
    const sent = await controller.submitReject('personal purchase');
    expect(sent).toBe(true);
    expect(controller.html).toContain('The final result is rejection.');
  });
});

describe('metrics view', () => {
  it('renders the four metrics and confusion counts', async () => {
    await controller.showMetrics();
    expect(controller.html).toContain('<td>1073</td>');
    expect(controller.html).toContain('<td>0.83</td>');
    expect(controller.html).toContain('<td>1.00</td>');
    expect(controller.html).toContain('<td>0.82</td>');
    expect(controller.html).toContain('<td>0.90</td>');
  });

  it('renders absent metrics as n/a', async () => {
    server.metricsPayload = {
      matrix: { tp: 0, tn: 0, fp: 0, fn: 0 },
      accuracy: null,
      precision: null,
      recall: null,
      f1: null,
    };
    await controller.showMetrics();
    expect(controller.html).toContain('n/a (zero denominator)');
  });
});
