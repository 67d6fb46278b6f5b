import { describe, expect, test } from 'vitest';

import { PlateauSchedule } from '../src/train';

describe('plateau schedule', () => {
  test('halves the learning rate after five stagnant epochs', () => {
    const s = new PlateauSchedule(1e-4, 5, 30);
    s.observe(1.0);
    for (let i = 0; i < 5; i++) s.observe(1.1);
    expect(s.learningRate).toBeCloseTo(5e-5, 12);
    s.observe(1.1); // sixth stagnant epoch: still one halving
    expect(s.learningRate).toBeCloseTo(5e-5, 12);
    for (let i = 0; i < 4; i++) s.observe(1.1); // tenth: halved again
    expect(s.learningRate).toBeCloseTo(2.5e-5, 12);
  });

  test('stops after thirty stagnant epochs', () => {
    const s = new PlateauSchedule(1e-4, 5, 30);
    s.observe(1.0);
    let stopped = false;
    let count = 0;
    while (!stopped) {
      stopped = s.observe(1.0).stop; // equal loss is not an improvement
      count += 1;
    }
    expect(count).toBe(30);
  });

  test('improvement resets the counter', () => {
    const s = new PlateauSchedule(1e-4, 5, 30);
    s.observe(1.0);
    for (let i = 0; i < 4; i++) s.observe(1.2);
    expect(s.observe(0.9).improved).toBe(true);
    for (let i = 0; i < 4; i++) s.observe(1.2);
    expect(s.learningRate).toBeCloseTo(1e-4, 12);
  });
});
