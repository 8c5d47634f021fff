//! Random inputs for fuzz-style integration tests.

use hydrosim::sampler::{MotorAction, MotorCommand, MotorStatus, SamplerStatus, MOTORS_PER_MODULE, N_MODULES, N_MOTORS};
use hydrosim::telemetry::{CommandMode, Message, SampleRecordMsg, TelemetryMsg};
use rand::Rng;

/// Any non-NaN f32, infinities and subnormals included.
pub fn any_f32<R: Rng>(rng: &mut R) -> f32 {
    loop {
        let v = f32::from_bits(rng.gen());
        if !v.is_nan() {
            return v;
        }
    }
}

fn action<R: Rng>(rng: &mut R) -> MotorAction {
    [MotorAction::Stop, MotorAction::Forward, MotorAction::Reverse][rng.gen_range(0..3)]
}

fn label<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(0..48);
    (0..n).map(|_| rng.gen_range(' '..='~')).collect::<String>() + if rng.gen_bool(0.1) { "µ" } else { "" }
}

pub fn message<R: Rng>(rng: &mut R) -> Message {
    match rng.gen_range(0..7) {
        0 => Message::Telemetry(TelemetryMsg {
            x: any_f32(rng),
            y: any_f32(rng),
            theta: any_f32(rng),
            voltage: any_f32(rng),
            current: any_f32(rng),
            soc_wh: any_f32(rng),
            mission_state: rng.gen(),
            motor_bitmap: rng.gen(),
        }),
        1 => Message::Command {
            mode: [CommandMode::Autonomous, CommandMode::Manual, CommandMode::Hold][rng.gen_range(0..3)],
            v_x: any_f32(rng),
            w_z: any_f32(rng),
        },
        2 => Message::MotorCommand(
            MotorCommand::new(rng.gen_range(0..N_MODULES) as u8, rng.gen_range(0..MOTORS_PER_MODULE) as u8, action(rng))
                .unwrap(),
        ),
        3 => Message::EStop { engage: rng.gen() },
        4 => Message::Ack { acked_seq: rng.gen() },
        5 => Message::SampleRecord(SampleRecordMsg {
            label: label(rng),
            volume: any_f32(rng),
            t_start: any_f32(rng),
            t_end: any_f32(rng),
            lat: any_f32(rng),
            lon: any_f32(rng),
        }),
        _ => Message::SamplerStatus(SamplerStatus {
            estop: rng.gen(),
            motors: (0..N_MOTORS)
                .map(|i| MotorStatus {
                    module: (i / MOTORS_PER_MODULE) as u8,
                    motor: (i % MOTORS_PER_MODULE) as u8,
                    action: action(rng),
                    home: rng.gen(),
                    travel: any_f32(rng) as f64,
                })
                .collect(),
        }),
    }
}

pub struct LocalizationRun {
    pub fused_rmse: f64,
    pub gnss_only_rmse: f64,
    pub dead_reckoning_rmse: f64,
}

/// Two minutes of a weaving unicycle track: 50 Hz IMU, 1 Hz GNSS at 0.5 m,
/// compared as fused EKF, held last GNSS fix, and IMU-only integration.
pub fn synthetic_localization(seed: u64) -> LocalizationRun {
    use hydrosim::localization::{predict, update_gnss, GnssFix, ImuSample, ProcessNoise, StateEstimate};
    use nalgebra::Matrix4;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dt, steps, fix_every) = (0.02, 6000, 50);
    let (gyro, accel, gnss) = (0.01, 0.05, 0.5);
    let n = |s: f64| Normal::new(0.0, s).unwrap();
    let (ng, na, nz) = (n(gyro), n(accel), n(gnss));
    let noise = ProcessNoise::diagonal(1e-4, 1e-4, gyro * gyro * dt, accel * accel * dt);

    let (mut x, mut y, mut th, mut v) = (0.0f64, 0.0f64, 0.3f64, 0.0f64);
    let p0 = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.01, 0.01, 0.001, 0.01));
    let mut fused = StateEstimate::new(x, y, th, v, p0);
    let mut dr = fused.clone();
    let mut held = (x, y);
    let (mut sf, mut sg, mut sd) = (0.0, 0.0, 0.0);
    let phase: f64 = rng.gen_range(0.0..6.28);
    for k in 1..=steps {
        let t = k as f64 * dt;
        let a = 0.3 * (0.2 * t + phase).sin() + if t < 3.0 { 0.4 } else { 0.0 };
        let w = 0.25 * (0.05 * t + phase).sin();
        x += v * th.cos() * dt;
        y += v * th.sin() * dt;
        th += w * dt;
        v = (v + a * dt).max(0.0);
        let applied = if v > 0.0 { a } else { 0.0 };
        let imu = ImuSample { yaw_rate: w + ng.sample(&mut rng), forward_accel: applied + na.sample(&mut rng), dt };
        fused = predict(&fused, &imu, &noise).unwrap();
        dr = predict(&dr, &imu, &noise).unwrap();
        if k % fix_every == 0 {
            let z = (x + nz.sample(&mut rng), y + nz.sample(&mut rng));
            fused = update_gnss(&fused, &GnssFix::isotropic(z.0, z.1, gnss)).unwrap();
            held = z;
        }
        let e2 = |ex: f64, ey: f64| (ex - x).powi(2) + (ey - y).powi(2);
        sf += e2(fused.x(), fused.y());
        sg += e2(held.0, held.1);
        sd += e2(dr.x(), dr.y());
    }
    let m = steps as f64;
    LocalizationRun { fused_rmse: (sf / m).sqrt(), gnss_only_rmse: (sg / m).sqrt(), dead_reckoning_rmse: (sd / m).sqrt() }
}
