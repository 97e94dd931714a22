#!/usr/bin/env node
import {infer} from './infer';
import {loadRunSpec} from './spec';
import {train} from './train';

function usage(): never {
  console.error('usage: evpupil-adapter <train|infer> --spec FILE');
  process.exit(2);
}

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (!command || !['train', 'infer'].includes(command)) usage();
  const flagIndex = rest.indexOf('--spec');
  if (flagIndex < 0 || flagIndex + 1 >= rest.length) usage();
  const spec = loadRunSpec(rest[flagIndex + 1]);

  if (command === 'train') {
    await train(spec);
  } else {
    await infer(spec);
  }
  return 0;
}

main(process.argv.slice(2))
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  });
