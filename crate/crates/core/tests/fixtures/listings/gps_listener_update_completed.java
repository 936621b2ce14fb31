public void addGpsStatusListener(GpsStatus.Listener listener) {
    mGpsStatusListener = listener;
    if (Build.VERSION.SDK_INT >= Build.VERSION_CODES.N) {
        // New method using GnssStatus.Callback
        mGnssStatusCallback = new GnssStatus.Callback() {
            @Override
            public void onSatelliteStatusChanged(GnssStatus status) {
                mKnownSatellites = status.getSatelliteCount();
                mUsedInLastFixSatellites = 0;
                for (int i = 0; i < mKnownSatellites; i++) {
                    if (status.usedInFix(i)) {
                        mUsedInLastFixSatellites++;
                    }
                }
            }
        };
        mLocationManager.registerGnssStatusCallback(mGnssStatusCallback);
    } else {
        // Old method for compatibility
        mLocationManager.addGpsStatusListener(mGpsStatusListener);
    }
}
